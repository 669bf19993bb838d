#include "latentgeo/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

#include "latentgeo/errors.hpp"
#include "latentgeo/metrics.hpp"

using nlohmann::json;

namespace latentgeo::eval {

namespace {

constexpr double kImageRange = 2.0;  // pixels live in [-1, 1]

double vec_mse(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s / static_cast<double>(a.size());
}

}  // namespace

TripletResult evaluate_triplet(const EvalModel& model, const TripletInput& t, interp::Kind kind,
                               const iat::MlpInterpolator* mlp) {
  TripletResult r;
  r.id = t.id;
  r.object_id = t.object_id;
  r.t1 = t.t1;
  r.t2 = t.t2;
  r.t3 = t.t3;
  r.kind = kind;
  try {
    const Vec z1 = model.encode_map_flat(t.x1);
    const Vec z2 = model.encode_map_flat(t.x2);
    const Vec z3 = model.encode_map_flat(t.x3);
    const double lambda = interp::lambda_from_times(t.t1, t.t2, t.t3);
    Vec zint = interp::interpolate(kind, z1, z3, lambda);
    if (mlp) zint = mlp->apply(z1, z3, zint);
    const Tensor xint = model.decode_flat(zint);

    if (model.domain() == data::DatasetKind::Image) {
      r.values["mse_x"] = metrics::mse(xint, t.x2);
      r.values["ssim_x"] = metrics::ssim(xint, t.x2, kImageRange);
      r.values["psnr_x"] = metrics::psnr(xint, t.x2, kImageRange);
    } else {
      r.values["bce_x"] = metrics::bce(xint, t.x2);
      r.values["eiou_x"] = metrics::e_iou(xint, t.x2);
    }
    r.values["mse_z"] = vec_mse(zint, z2);
    r.values["cosdist_z"] = metrics::cosine_distance(zint, z2);
  } catch (const Error& e) {
    throw Error("evaluate_triplet (id " + std::to_string(t.id) + ", object " + std::to_string(t.object_id) +
                "): " + e.what());
  }
  return r;
}

namespace {

struct PoolEntry {
  int seq;
  int p1, p2, p3;
};

// All (sequence, ordered 3-combination) choices in deterministic order.
std::vector<PoolEntry> full_triplet_pool(const std::vector<data::SequenceView>& views) {
  std::vector<PoolEntry> pool;
  for (std::size_t s = 0; s < views.size(); ++s) {
    const int m = static_cast<int>(views[s].ts.size());
    for (int i = 0; i < m - 2; ++i)
      for (int j = i + 1; j < m - 1; ++j)
        for (int k = j + 1; k < m; ++k) pool.push_back({static_cast<int>(s), i, j, k});
  }
  return pool;
}

}  // namespace

SuiteResult evaluate_suite(const EvalModel& model, const data::Dataset& ds, data::SplitTag tag,
                           const std::vector<interp::Kind>& kinds, int n_triplets, std::uint64_t seed,
                           const iat::MlpInterpolator* mlp) {
  if (n_triplets < 1) throw ConfigError("evaluate_suite: n_triplets must be positive");
  const std::vector<data::SequenceView> views = data::split_view(ds, tag);
  std::vector<PoolEntry> pool = full_triplet_pool(views);
  if (pool.empty()) throw ConfigError("evaluate_suite: split has no valid triplets");

  // Without replacement until the pool runs out, then with replacement.
  Rng rng(Rng::mix(seed, 0x747269ULL));
  SuiteResult out;
  std::vector<PoolEntry> chosen;
  const int n_pool = static_cast<int>(pool.size());
  if (n_triplets >= n_pool) {
    chosen = pool;
    out.with_replacement = n_triplets > n_pool;
    for (int i = n_pool; i < n_triplets; ++i) {
      chosen.push_back(pool[static_cast<std::size_t>(rng.uniform_int(static_cast<std::uint64_t>(n_pool)))]);
    }
  } else {
    for (int i = 0; i < n_triplets; ++i) {
      const int j = i + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(n_pool - i)));
      std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(j)]);
      chosen.push_back(pool[static_cast<std::size_t>(i)]);
    }
  }

  // Materialize inputs once; every kind scores the same triplets.
  std::vector<TripletInput> inputs;
  inputs.reserve(chosen.size());
  for (std::size_t i = 0; i < chosen.size(); ++i) {
    const PoolEntry& e = chosen[i];
    const data::SequenceView& seq = views[static_cast<std::size_t>(e.seq)];
    TripletInput in;
    in.id = static_cast<std::int64_t>(i);
    in.object_id = seq.object_id;
    in.t1 = seq.ts[static_cast<std::size_t>(e.p1)];
    in.t2 = seq.ts[static_cast<std::size_t>(e.p2)];
    in.t3 = seq.ts[static_cast<std::size_t>(e.p3)];
    in.x1 = data::fetch_sample(ds, seq, e.p1);
    in.x2 = data::fetch_sample(ds, seq, e.p2);
    in.x3 = data::fetch_sample(ds, seq, e.p3);
    inputs.push_back(std::move(in));
  }

  for (interp::Kind kind : kinds) {
    std::map<std::string, std::vector<double>> samples;
    for (const TripletInput& in : inputs) {
      TripletResult tr = evaluate_triplet(model, in, kind, mlp);
      for (const auto& [name, v] : tr.values) samples[name].push_back(v);
      report::RawRow raw;
      raw.triplet_id = tr.id;
      raw.object_id = tr.object_id;
      raw.t1 = tr.t1;
      raw.t2 = tr.t2;
      raw.t3 = tr.t3;
      raw.kind = interp::to_string(kind);
      raw.values = tr.values;
      out.raw.push_back(std::move(raw));
    }
    out.rows.push_back(report::make_report({{"kind", interp::to_string(kind)}}, samples));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Harnesses

interp::Kind default_kind(data::DatasetKind kind) {
  return kind == data::DatasetKind::Image ? interp::Kind::Norm : interp::Kind::Slerp;
}

ParamStore& TrainedModel::params() { return image ? image->params() : graph->params(); }
const ParamStore& TrainedModel::params() const { return image ? image->params() : graph->params(); }

std::unique_ptr<EvalModel> TrainedModel::eval_view() const {
  if (image) return std::make_unique<ImageVaeEval>(*image);
  return std::make_unique<GraphVaeEval>(*graph);
}

std::optional<iat::MlpInterpolator> TrainedModel::mlp_view() const {
  const ParamStore& p = params();
  if (!iat::InterpMlp::params_present(p)) return std::nullopt;
  iat::MlpInterpolator m;
  m.params = &p;
  m.latent_len = p.at("imlp.w2").shape()[1];
  return m;
}

json TrainedModel::manifest() const { return image ? image->manifest() : graph->manifest(); }

TrainedModel train_model(const data::Dataset& ds, const HarnessConfig& cfg, std::uint64_t seed) {
  TrainedModel out;
  training::TrainConfig tc = cfg.train;
  tc.seed = seed;
  const std::uint64_t init_seed = Rng::mix(seed, 0x696e6974ULL);
  if (ds.kind == data::DatasetKind::Image) {
    models::VaeConfig mc;
    mc.image_size = ds.image.image_size;
    mc.latent_dim = cfg.latent_dim;
    mc.hidden = cfg.hidden;
    mc.rank = cfg.rank;
    mc.sigma_x = cfg.sigma_x;
    mc.init_seed = init_seed;
    out.image = std::make_unique<models::ImageVae>(mc);
    out.result = training::train(*out.image, ds, tc);
  } else {
    models::GvaeConfig mc;
    mc.n_nodes = ds.graph.n_nodes;
    mc.latent_dim = cfg.latent_dim;
    mc.gcn_hidden = cfg.gcn_hidden;
    mc.rank = cfg.rank;
    mc.init_seed = init_seed;
    out.graph = std::make_unique<models::GraphVae>(mc);
    out.result = training::train(*out.graph, ds, tc);
  }
  return out;
}

void save_trained(const TrainedModel& m, const std::string& path) {
  json manifest = m.manifest();
  const ParamStore& p = m.params();
  if (iat::InterpMlp::params_present(p)) {
    manifest["interp_mlp_len"] = p.at("imlp.w2").shape()[1];
  }
  models::save_checkpoint(path, manifest, p);
}

TrainedModel load_model(const std::string& path) {
  const models::Checkpoint ck = models::load_checkpoint(path);
  TrainedModel out;
  const std::string kind = ck.manifest.at("model").get<std::string>();
  if (kind == "image_vae") {
    out.image = std::make_unique<models::ImageVae>(models::ImageVae::config_from_manifest(ck.manifest));
  } else if (kind == "graph_vae") {
    out.graph = std::make_unique<models::GraphVae>(models::GraphVae::config_from_manifest(ck.manifest));
  } else {
    throw IoError("checkpoint " + path + ": unknown model kind \"" + kind + "\"");
  }
  if (ck.manifest.contains("interp_mlp_len")) {
    Rng dummy(0);  // values are overwritten by restore_params
    iat::InterpMlp::create_params(out.params(), ck.manifest.at("interp_mlp_len").get<int>(), dummy);
  }
  models::restore_params(out.params(), ck);
  return out;
}

namespace {

report::MetricReport keyed(report::MetricReport row,
                           const std::vector<std::pair<std::string, std::string>>& front_keys) {
  report::MetricReport out = std::move(row);
  std::vector<std::pair<std::string, std::string>> keys = front_keys;
  for (auto& kv : out.keys) keys.push_back(std::move(kv));
  out.keys = std::move(keys);
  return out;
}

std::vector<std::uint64_t> run_seeds(const HarnessConfig& cfg) {
  return cfg.seeds.empty() ? std::vector<std::uint64_t>{cfg.train.seed} : cfg.seeds;
}

struct CellSpec {
  std::string label;                                      // "D32", "R8", "mlp_decode", "budget25"
  std::vector<std::pair<std::string, std::string>> keys;  // label key + seed key
  HarnessConfig cfg;
  std::uint64_t seed = 1;
  bool use_mlp = false;
};

struct CellOutcome {
  std::vector<report::MetricReport> rows;
  std::vector<report::RawRow> raw;
  std::optional<std::pair<std::string, std::string>> error;
};

CellOutcome run_cell(const data::Dataset& ds, const CellSpec& cell, const std::vector<interp::Kind>& kinds) {
  CellOutcome out;
  try {
    const TrainedModel m = train_model(ds, cell.cfg, cell.seed);
    const auto mlp = cell.use_mlp ? m.mlp_view() : std::nullopt;
    SuiteResult sr = evaluate_suite(*m.eval_view(), ds, data::SplitTag::Test, kinds,
                                    cell.cfg.n_triplets, cell.cfg.eval_seed, mlp ? &*mlp : nullptr);
    for (report::MetricReport& row : sr.rows) out.rows.push_back(keyed(std::move(row), cell.keys));
    out.raw = std::move(sr.raw);
  } catch (const DivergenceError& e) {
    out.error = {cell.label + "/seed" + std::to_string(cell.seed), e.what()};
  }
  return out;
}

// Cells are independent single-threaded runs; executing them on a pool and
// merging in cell order keeps reports identical for any jobs value.
ExperimentResult run_cells(const data::Dataset& ds, const std::vector<CellSpec>& cells,
                           const std::vector<interp::Kind>& kinds, int jobs) {
  std::vector<CellOutcome> outcomes(cells.size());
  if (jobs <= 1) {
    for (std::size_t i = 0; i < cells.size(); ++i) outcomes[i] = run_cell(ds, cells[i], kinds);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    const int n_threads = std::min<int>(jobs, static_cast<int>(cells.size()));
    for (int t = 0; t < n_threads; ++t) {
      pool.emplace_back([&]() {
        while (true) {
          const std::size_t i = next.fetch_add(1);
          if (i >= cells.size()) return;
          outcomes[i] = run_cell(ds, cells[i], kinds);
        }
      });
    }
    for (std::thread& t : pool) t.join();
  }

  ExperimentResult out;
  // per-label groups for the median rows, in first-appearance order
  std::vector<std::string> labels;
  std::map<std::string, std::vector<report::MetricReport>> by_label;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    CellOutcome& o = outcomes[i];
    for (report::MetricReport& row : o.rows) {
      by_label[cells[i].label].push_back(row);
      out.rows.push_back(std::move(row));
    }
    if (std::find(labels.begin(), labels.end(), cells[i].label) == labels.end()) {
      labels.push_back(cells[i].label);
    }
    for (report::RawRow& r : o.raw) out.raw.push_back(std::move(r));
    if (o.error) out.errors.push_back(*o.error);
  }
  for (const std::string& label : labels) {
    const auto& group = by_label[label];
    if (group.size() > 1) out.rows.push_back(report::median_over_seeds(group));
  }
  return out;
}

}  // namespace

ExperimentResult sweep_rank_dim(const data::Dataset& ds, const HarnessConfig& base,
                                const std::vector<int>& dims, const std::vector<int>& ranks) {
  if (dims.empty() && ranks.empty()) throw ConfigError("sweep_rank_dim: nothing to sweep");
  const std::vector<interp::Kind> kinds{default_kind(ds.kind)};

  std::vector<CellSpec> cells;
  auto add_cell = [&](const std::string& label, int dim, int rank) {
    for (std::uint64_t seed : run_seeds(base)) {
      CellSpec c;
      c.label = label;
      c.keys = {{"cell", label}, {"seed", std::to_string(seed)}};
      c.cfg = base;
      c.cfg.latent_dim = dim;
      c.cfg.rank = rank;
      c.seed = seed;
      cells.push_back(std::move(c));
    }
  };
  for (int d : dims) add_cell("D" + std::to_string(d), d, 0);
  for (int r : ranks) add_cell("R" + std::to_string(r), base.latent_dim, r);
  return run_cells(ds, cells, kinds, base.jobs);
}

ExperimentResult run_iat_experiment(const data::Dataset& ds, const HarnessConfig& base,
                                    const std::vector<std::optional<iat::Variant>>& variants,
                                    interp::Kind kind, double lambda_iat) {
  if (variants.empty()) throw ConfigError("run_iat_experiment: no variants");
  const std::vector<interp::Kind> kinds{kind};

  std::vector<CellSpec> cells;
  for (const std::optional<iat::Variant>& v : variants) {
    const std::string label = v ? iat::to_string(*v) : "none";
    for (std::uint64_t seed : run_seeds(base)) {
      CellSpec c;
      c.label = label;
      c.keys = {{"iat", label}, {"seed", std::to_string(seed)}};
      c.cfg = base;
      c.cfg.train.iat_variant = v;
      c.cfg.train.iat_kind = kind;
      c.cfg.train.lambda_iat = lambda_iat;
      c.seed = seed;
      c.use_mlp = v && iat::uses_mlp(*v);
      cells.push_back(std::move(c));
    }
  }
  return run_cells(ds, cells, kinds, base.jobs);
}

ExperimentResult label_budget_study(const data::Dataset& ds, const HarnessConfig& base,
                                    const std::vector<int>& budgets, interp::Kind kind, double lambda_iat) {
  if (budgets.empty()) throw ConfigError("label_budget_study: no budgets");
  for (std::size_t i = 1; i < budgets.size(); ++i) {
    if (budgets[i] < budgets[i - 1]) throw ConfigError("label_budget_study: budgets must ascend");
  }
  const std::vector<interp::Kind> kinds{kind};

  std::vector<CellSpec> cells;
  for (int budget : budgets) {
    if (budget < 3) throw ConfigError("label_budget_study: budget must be >= 3");
    for (std::uint64_t seed : run_seeds(base)) {
      CellSpec c;
      c.label = "budget" + std::to_string(budget);
      c.keys = {{"budget", std::to_string(budget)}, {"seed", std::to_string(seed)}};
      c.cfg = base;
      c.cfg.train.iat_variant = iat::Variant::MlpDecode;
      c.cfg.train.iat_kind = kind;
      c.cfg.train.lambda_iat = lambda_iat;
      c.cfg.train.labeled_budget = budget;
      c.seed = seed;
      c.use_mlp = true;
      cells.push_back(std::move(c));
    }
  }
  return run_cells(ds, cells, kinds, base.jobs);
}

}  // namespace latentgeo::eval
