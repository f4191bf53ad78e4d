#include "polygen/policy.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <stdexcept>

#include "polygen/version.hpp"

namespace polygen {

namespace {
constexpr const char* kCheckpointFormat = "policy-checkpoint";
constexpr int kCheckpointVersion = 1;
constexpr const char* kOctantEncoding = "bit t set when variable t positive";
}  // namespace

void PolicyConfig::validate() const {
  if (dim < 1) throw std::invalid_argument("PolicyConfig: dim must be positive");
  if (static_cast<int>(cardinalities.size()) != dim)
    throw std::invalid_argument("PolicyConfig: cardinalities must have one entry per variable");
  for (int c : cardinalities)
    if (c < 1) throw std::invalid_argument("PolicyConfig: cardinality must be positive");
  if (noise_dim < 1) throw std::invalid_argument("PolicyConfig: noise_dim must be positive");
  if (emb_dim < 1) throw std::invalid_argument("PolicyConfig: emb_dim must be positive");
  if (num_classes < 1) throw std::invalid_argument("PolicyConfig: num_classes must be positive");
  if (!conditional && num_classes != 1)
    throw std::invalid_argument("PolicyConfig: unconditional generator requires num_classes == 1");
  for (int h : hidden)
    if (h < 1) throw std::invalid_argument("PolicyConfig: hidden widths must be positive");
}

PolicyConfig PolicyConfig::for_problem(const SyntProblem& problem, int num_classes,
                                       int noise_dim, int emb_dim, std::vector<int> hidden) {
  PolicyConfig cfg;
  cfg.dim = problem.dim;
  cfg.cardinalities.reserve(problem.domains.size());
  for (const DiscreteDomain& d : problem.domains) cfg.cardinalities.push_back(d.cardinality);
  cfg.noise_dim = noise_dim;
  cfg.emb_dim = emb_dim;
  cfg.num_classes = num_classes;
  cfg.conditional = num_classes > 1;
  cfg.hidden = std::move(hidden);
  cfg.validate();
  return cfg;
}

void PolicyGenerator::build_layout() {
  cfg_.validate();
  layouts_.clear();
  cell_offsets_.clear();
  std::size_t offset = 0;
  for (int t = 0; t < cfg_.dim; ++t) {
    std::vector<int> sizes;
    sizes.push_back(cfg_.cell_input_width());
    sizes.insert(sizes.end(), cfg_.hidden.begin(), cfg_.hidden.end());
    sizes.push_back(cfg_.cardinalities[t]);
    layouts_.push_back(MlpLayout::chain(sizes, Activation::rectifier));
    cell_offsets_.push_back(offset);
    offset += layouts_.back().param_count;
  }
  emb_offset_ = offset;
  offset += static_cast<std::size_t>(cfg_.num_classes) * cfg_.emb_dim;
  params_.assign(offset, 0.0);
}

PolicyGenerator::PolicyGenerator(PolicyConfig cfg, SeededRng& init_rng) : cfg_(std::move(cfg)) {
  build_layout();
  for (int t = 0; t < cfg_.dim; ++t) {
    std::span<double> cell(params_.data() + cell_offsets_[t], layouts_[t].param_count);
    init_mlp(init_rng, layouts_[t], cell);
  }
  if (cfg_.conditional) {
    // Sign-code rows (-1)^popcount(r & d): pairwise orthogonal whenever
    // num_classes <= emb_dim with emb_dim a power of two, so classes start
    // maximally separated instead of randomly overlapping. Rows are still
    // trained like any other parameters.
    double* emb = params_.data() + emb_offset_;
    for (int r = 0; r < cfg_.num_classes; ++r)
      for (int d = 0; d < cfg_.emb_dim; ++d)
        emb[r * cfg_.emb_dim + d] = std::popcount(static_cast<unsigned>(r & d)) & 1 ? -1.0 : 1.0;
  }
}

PolicyGenerator PolicyGenerator::zeroed(PolicyConfig cfg) {
  SeededRng rng(0);
  PolicyGenerator gen(std::move(cfg), rng);
  std::fill(gen.params_.begin(), gen.params_.end(), 0.0);
  return gen;
}

std::size_t PolicyGenerator::trainable_count() const {
  return cfg_.conditional ? params_.size() : emb_offset_;
}

std::span<const double> PolicyGenerator::cell_params(int t) const {
  return {params_.data() + cell_offsets_[t], layouts_[t].param_count};
}

std::span<const double> PolicyGenerator::embedding_row(int label) const {
  check_label(label);
  return {params_.data() + emb_offset_ + static_cast<std::size_t>(label) * cfg_.emb_dim,
          static_cast<std::size_t>(cfg_.emb_dim)};
}

void PolicyGenerator::check_label(int label) const {
  if (label < 0 || label >= cfg_.num_classes)
    throw std::out_of_range("class label " + std::to_string(label) + " out of range (num_classes=" +
                            std::to_string(cfg_.num_classes) + ")");
}

std::string PolicyGenerator::param_block_name(std::size_t index) const {
  if (index >= params_.size()) return "parameter " + std::to_string(index) + " (out of range)";
  if (index >= emb_offset_) {
    const std::size_t rel = index - emb_offset_;
    return "embedding row " + std::to_string(rel / cfg_.emb_dim);
  }
  for (int t = cfg_.dim - 1; t >= 0; --t) {
    if (index >= cell_offsets_[t]) {
      const std::size_t rel = index - cell_offsets_[t];
      const MlpLayout& layout = layouts_[t];
      for (std::size_t l = 0; l < layout.layers.size(); ++l) {
        if (rel >= layout.bias_offset[l] &&
            rel < layout.bias_offset[l] + static_cast<std::size_t>(layout.layers[l].out))
          return "cell " + std::to_string(t) + " layer " + std::to_string(l) + " biases";
        if (rel >= layout.weight_offset[l] && rel < layout.bias_offset[l])
          return "cell " + std::to_string(t) + " layer " + std::to_string(l) + " weights";
      }
      return "cell " + std::to_string(t);
    }
  }
  return "parameter " + std::to_string(index);
}

void PolicyGenerator::cell_distribution(int t, std::span<const double> cell_noise, int label,
                                        MlpCache& cache, std::span<double> probs) const {
  check_label(label);
  if (t < 0 || t >= cfg_.dim) throw std::out_of_range("cell index out of range");
  if (cell_noise.size() != static_cast<std::size_t>(cfg_.noise_dim))
    throw std::invalid_argument("cell_distribution: noise width mismatch");
  if (probs.size() != static_cast<std::size_t>(cfg_.cardinalities[t]))
    throw std::invalid_argument("cell_distribution: probability width mismatch");
  const MlpLayout& layout = layouts_[t];
  if (cache.input.size() != static_cast<std::size_t>(layout.input_width()) ||
      cache.pre.size() != layout.layers.size() || cache.pre.empty() ||
      cache.pre.back().size() != static_cast<std::size_t>(layout.output_width()))
    cache.resize(layout);
  std::copy(cell_noise.begin(), cell_noise.end(), cache.input.begin());
  const std::span<const double> emb = embedding_row(label);
  std::copy(emb.begin(), emb.end(), cache.input.begin() + cfg_.noise_dim);
  mlp_forward(layouts_[t], cell_params(t), cache);
  softmax(cache.logits(), probs);
}

ActionDistribution PolicyGenerator::act_distribution(std::span<const double> noise, int label) const {
  check_label(label);
  if (noise.size() != static_cast<std::size_t>(cfg_.dim) * cfg_.noise_dim)
    throw std::invalid_argument("act_distribution: noise must be dim x noise_dim");
  ActionDistribution dist;
  dist.per_cell.resize(cfg_.dim);
  MlpCache cache;
  for (int t = 0; t < cfg_.dim; ++t) {
    cache.resize(layouts_[t]);
    dist.per_cell[t].assign(static_cast<std::size_t>(cfg_.cardinalities[t]), 0.0);
    cell_distribution(t, noise.subspan(static_cast<std::size_t>(t) * cfg_.noise_dim, cfg_.noise_dim),
                      label, cache, dist.per_cell[t]);
  }
  return dist;
}

SampledAction sample_action(SeededRng& rng, const ActionDistribution& dist,
                            const SyntProblem* problem) {
  SampledAction out;
  out.assignment.indices.reserve(dist.per_cell.size());
  double lp = 0.0;
  for (const auto& probs : dist.per_cell) {
    const double u = rng.uniform01();
    double acc = 0.0;
    int chosen = static_cast<int>(probs.size()) - 1;
    for (std::size_t j = 0; j < probs.size(); ++j) {
      acc += probs[j];
      if (u < acc) {
        chosen = static_cast<int>(j);
        break;
      }
    }
    out.assignment.indices.push_back(chosen);
    lp += floored_log(probs[chosen]);
  }
  if (problem != nullptr) out.assignment = make_assignment(*problem, std::move(out.assignment.indices));
  out.log_prob = lp;
  out.distribution = dist;
  return out;
}

double log_prob(const ActionDistribution& dist, std::span<const int> indices) {
  if (indices.size() != dist.per_cell.size())
    throw std::invalid_argument("log_prob: dimension mismatch");
  double lp = 0.0;
  for (std::size_t t = 0; t < indices.size(); ++t) {
    const auto& probs = dist.per_cell[t];
    if (indices[t] < 0 || indices[t] >= static_cast<int>(probs.size()))
      throw std::out_of_range("log_prob: index out of range");
    lp += floored_log(probs[indices[t]]);
  }
  return lp;
}

double log_prob(const ActionDistribution& dist, const Assignment& a) {
  return log_prob(dist, std::span<const int>(a.indices));
}

double entropy(const ActionDistribution& dist) {
  double h = 0.0;
  for (const auto& probs : dist.per_cell) {
    double cell_h = 0.0;
    for (double p : probs)
      if (p > 0.0) cell_h -= p * std::log(p);
    h += cell_h;
  }
  return h;
}

double region_log_mass(const ActionDistribution& dist, const RegionSpec& region) {
  if (region.allowed.size() != dist.per_cell.size())
    throw std::invalid_argument("region_log_mass: dimension mismatch");
  double total = 0.0;
  for (std::size_t t = 0; t < region.allowed.size(); ++t) {
    const auto& probs = dist.per_cell[t];
    double mass = 0.0;
    for (int j : region.allowed[t]) mass += probs[j];
    total += floored_log(mass);
  }
  return total;
}

double region_sum_log(const ActionDistribution& dist, const RegionSpec& region) {
  if (region.allowed.size() != dist.per_cell.size())
    throw std::invalid_argument("region_sum_log: dimension mismatch");
  double total = 0.0;
  for (std::size_t t = 0; t < region.allowed.size(); ++t) {
    const auto& probs = dist.per_cell[t];
    // |region| / |allowed_t|, kept exact as a product over the other variables.
    double weight = 1.0;
    for (std::size_t s = 0; s < region.allowed.size(); ++s)
      if (s != t) weight *= static_cast<double>(region.allowed[s].size());
    double cell_sum = 0.0;
    for (int j : region.allowed[t]) cell_sum += floored_log(probs[j]);
    total += weight * cell_sum;
  }
  return total;
}

nlohmann::json checkpoint_save(const PolicyGenerator& gen, const AdamState* optimizer) {
  const PolicyConfig& cfg = gen.config();
  nlohmann::json doc;
  doc["format"] = kCheckpointFormat;
  doc["version"] = kCheckpointVersion;
  doc["build"] = kBuildId;
  doc["policy"] = {
      {"dim", cfg.dim},
      {"cardinalities", cfg.cardinalities},
      {"noise_dim", cfg.noise_dim},
      {"emb_dim", cfg.emb_dim},
      {"num_classes", cfg.num_classes},
      {"conditional", cfg.conditional},
      {"hidden", cfg.hidden},
      {"octant_encoding", kOctantEncoding},
  };
  nlohmann::json cells = nlohmann::json::array();
  for (int t = 0; t < cfg.dim; ++t) {
    const MlpLayout& layout = gen.cell_layout(t);
    const std::span<const double> params = gen.cell_params(t);
    nlohmann::json layers = nlohmann::json::array();
    for (std::size_t l = 0; l < layout.layers.size(); ++l) {
      const LayerSpec& spec = layout.layers[l];
      const double* w = params.data() + layout.weight_offset[l];
      const double* b = params.data() + layout.bias_offset[l];
      layers.push_back({
          {"in", spec.in},
          {"out", spec.out},
          {"activation", activation_name(spec.act)},
          {"weights", std::vector<double>(w, w + static_cast<std::size_t>(spec.in) * spec.out)},
          {"biases", std::vector<double>(b, b + spec.out)},
      });
    }
    cells.push_back({{"layers", std::move(layers)}});
  }
  doc["cells"] = std::move(cells);
  nlohmann::json embedding = nlohmann::json::array();
  for (int r = 0; r < cfg.num_classes; ++r) {
    const std::span<const double> row = gen.embedding_row(r);
    embedding.push_back(std::vector<double>(row.begin(), row.end()));
  }
  doc["embedding"] = std::move(embedding);
  if (optimizer != nullptr) {
    const auto m = optimizer->first_moment();
    const auto v = optimizer->second_moment();
    doc["optimizer"] = {
        {"type", "adam"},
        {"step", optimizer->step_count()},
        {"lr", optimizer->config().lr},
        {"beta1", optimizer->config().beta1},
        {"beta2", optimizer->config().beta2},
        {"eps", optimizer->config().eps},
        {"m", std::vector<double>(m.begin(), m.end())},
        {"v", std::vector<double>(v.begin(), v.end())},
    };
  }
  return doc;
}

PolicyGenerator checkpoint_load(const nlohmann::json& doc, AdamState* optimizer) {
  if (!doc.is_object() || !doc.contains("format") || doc["format"] != kCheckpointFormat)
    throw std::runtime_error("checkpoint: not a policy checkpoint document");
  if (!doc.contains("version") || doc["version"].get<int>() != kCheckpointVersion)
    throw std::runtime_error("checkpoint: unsupported version");
  const nlohmann::json& p = doc.at("policy");
  PolicyConfig cfg;
  cfg.dim = p.at("dim").get<int>();
  cfg.cardinalities = p.at("cardinalities").get<std::vector<int>>();
  cfg.noise_dim = p.at("noise_dim").get<int>();
  cfg.emb_dim = p.at("emb_dim").get<int>();
  cfg.num_classes = p.at("num_classes").get<int>();
  cfg.conditional = p.at("conditional").get<bool>();
  cfg.hidden = p.at("hidden").get<std::vector<int>>();
  cfg.validate();

  PolicyGenerator gen = PolicyGenerator::zeroed(cfg);
  const nlohmann::json& cells = doc.at("cells");
  if (static_cast<int>(cells.size()) != cfg.dim)
    throw std::runtime_error("checkpoint: expected " + std::to_string(cfg.dim) + " cells, found " +
                             std::to_string(cells.size()));
  std::span<double> params = gen.params_mut();
  for (int t = 0; t < cfg.dim; ++t) {
    const MlpLayout& layout = gen.cell_layout(t);
    const nlohmann::json& layers = cells[t].at("layers");
    if (layers.size() != layout.layers.size())
      throw std::runtime_error("checkpoint: cell " + std::to_string(t) + " layer count mismatch");
    for (std::size_t l = 0; l < layout.layers.size(); ++l) {
      const LayerSpec& spec = layout.layers[l];
      const nlohmann::json& layer = layers[l];
      if (layer.at("in").get<int>() != spec.in || layer.at("out").get<int>() != spec.out)
        throw std::runtime_error("checkpoint: cell " + std::to_string(t) + " layer " +
                                 std::to_string(l) + " shape mismatch");
      if (activation_from_name(layer.at("activation").get<std::string>()) != spec.act)
        throw std::runtime_error("checkpoint: cell " + std::to_string(t) + " layer " +
                                 std::to_string(l) + " activation mismatch");
      const auto weights = layer.at("weights").get<std::vector<double>>();
      const auto biases = layer.at("biases").get<std::vector<double>>();
      if (weights.size() != static_cast<std::size_t>(spec.in) * spec.out ||
          biases.size() != static_cast<std::size_t>(spec.out))
        throw std::runtime_error("checkpoint: cell " + std::to_string(t) + " layer " +
                                 std::to_string(l) + " parameter count mismatch");
      std::copy(weights.begin(), weights.end(),
                params.begin() + gen.cell_offset(t) + layout.weight_offset[l]);
      std::copy(biases.begin(), biases.end(),
                params.begin() + gen.cell_offset(t) + layout.bias_offset[l]);
    }
  }
  const nlohmann::json& embedding = doc.at("embedding");
  if (static_cast<int>(embedding.size()) != cfg.num_classes)
    throw std::runtime_error("checkpoint: embedding row count mismatch");
  for (int r = 0; r < cfg.num_classes; ++r) {
    const auto row = embedding[r].get<std::vector<double>>();
    if (row.size() != static_cast<std::size_t>(cfg.emb_dim))
      throw std::runtime_error("checkpoint: embedding row " + std::to_string(r) + " width mismatch");
    std::copy(row.begin(), row.end(),
              params.begin() + gen.embedding_offset() + static_cast<std::size_t>(r) * cfg.emb_dim);
  }
  if (optimizer != nullptr && doc.contains("optimizer")) {
    const nlohmann::json& opt = doc.at("optimizer");
    AdamConfig acfg;
    acfg.lr = opt.at("lr").get<double>();
    acfg.beta1 = opt.at("beta1").get<double>();
    acfg.beta2 = opt.at("beta2").get<double>();
    acfg.eps = opt.at("eps").get<double>();
    AdamState state(gen.param_count(), acfg);
    const auto m = opt.at("m").get<std::vector<double>>();
    const auto v = opt.at("v").get<std::vector<double>>();
    if (m.size() != gen.param_count() || v.size() != gen.param_count())
      throw std::runtime_error("checkpoint: optimizer state size mismatch");
    state.restore(opt.at("step").get<std::int64_t>(), m, v);
    *optimizer = std::move(state);
  }
  return gen;
}

}  // namespace polygen
