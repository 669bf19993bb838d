#include "latentgeo/training.hpp"

#include <cmath>
#include <memory>

#include "latentgeo/adam.hpp"
#include "latentgeo/errors.hpp"

namespace latentgeo::training {

namespace {

// Seed streams per purpose so optional components never shift each other.
enum Stream : std::uint64_t {
  kBatchStream = 1,
  kNoiseStream = 2,
  kTripletStream = 3,
  kMlpInitStream = 4,
  kBudgetStream = 5,
};

void accumulate(NamedGrads& dst, const NamedGrads& src, double alpha) {
  for (auto& [name, g] : src) {
    auto it = dst.find(name);
    if (it == dst.end()) {
      Tensor t = g;
      for (std::int64_t k = 0; k < t.numel(); ++k) t.at(k) *= alpha;
      dst.emplace(name, std::move(t));
    } else {
      for (std::int64_t k = 0; k < g.numel(); ++k) it->second.at(k) += alpha * g.at(k);
    }
  }
}

// Draw `count` distinct indices from [0, n) (all of them when count >= n).
std::vector<int> draw_indices(int n, int count, Rng& rng) {
  std::vector<int> idx(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
  const int take = std::min(count, n);
  for (int i = 0; i < take; ++i) {
    const int j = i + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(n - i)));
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
  }
  idx.resize(static_cast<std::size_t>(take));
  return idx;
}

Tensor normal_tensor(std::vector<int> shape, Rng& rng) {
  Tensor t(std::move(shape));
  for (std::int64_t k = 0; k < t.numel(); ++k) t.at(k) = rng.normal();
  return t;
}

void check_finite(double loss, int iter, const std::vector<TraceRow>& trace) {
  if (std::isfinite(loss)) return;
  std::string recent;
  const std::size_t n = trace.size();
  for (std::size_t i = n >= 5 ? n - 5 : 0; i < n; ++i) {
    recent += " " + std::to_string(trace[i].loss);
  }
  throw DivergenceError("training diverged at iteration " + std::to_string(iter) +
                        " (loss not finite; recent losses:" + recent + ")");
}

std::vector<data::SequenceView> triplet_pool(const data::Dataset& ds, const TrainConfig& cfg) {
  std::vector<data::SequenceView> pool = data::split_view(ds, data::SplitTag::Train);
  if (cfg.labeled_budget > 0) {
    pool = iat::restrict_budget(pool, cfg.labeled_budget, Rng::mix(cfg.seed, kBudgetStream));
  }
  return pool;
}

}  // namespace

TrainResult train(models::ImageVae& model, const data::Dataset& ds, const TrainConfig& cfg) {
  if (ds.kind != data::DatasetKind::Image) throw ConfigError("train: image model needs an image dataset");
  if (cfg.iters < 0 || cfg.batch < 1) throw ConfigError("train: bad iteration or batch count");

  const int hw = model.pixels();
  const int d = model.config().latent_dim;

  // Flatten the training split once; batches are row gathers.
  std::vector<const Tensor*> samples;
  for (const data::ImageSequence& seq : ds.image.objects) {
    for (const data::ImageSample& s : seq.samples) {
      if (s.split == data::SplitTag::Train) samples.push_back(&s.image);
    }
  }
  if (samples.empty()) throw ConfigError("train: dataset has no training samples");
  const int pool_size = static_cast<int>(samples.size());

  const bool iat_active = cfg.iat_variant.has_value();
  std::vector<data::SequenceView> trip_pool;
  if (iat_active) {
    trip_pool = triplet_pool(ds, cfg);
    if (iat::uses_mlp(*cfg.iat_variant) && !iat::InterpMlp::params_present(model.params())) {
      Rng init_rng(Rng::mix(cfg.seed, kMlpInitStream));
      iat::InterpMlp::create_params(model.params(), d, init_rng);
    }
  }

  models::LossGraph elbo = model.make_elbo_graph(cfg.batch);
  std::unique_ptr<iat::IatGraph> ig;
  if (iat_active) {
    ig = std::make_unique<iat::IatGraph>(
        iat::make_image_iat_graph(model, *cfg.iat_variant, cfg.iat_kind, cfg.triplet_batch));
  }

  AdamState adam(model.params());
  Rng batch_rng(Rng::mix(cfg.seed, kBatchStream));
  Rng noise_rng(Rng::mix(cfg.seed, kNoiseStream));
  Rng trip_rng(Rng::mix(cfg.seed, kTripletStream));

  TrainResult result;
  result.trace.reserve(static_cast<std::size_t>(cfg.iters));
  Tensor xbatch({cfg.batch, hw});

  for (int iter = 0; iter < cfg.iters; ++iter) {
    const std::vector<int> idx = draw_indices(pool_size, cfg.batch, batch_rng);
    for (int r = 0; r < cfg.batch; ++r) {
      const Tensor& src = *samples[static_cast<std::size_t>(idx[static_cast<std::size_t>(r % idx.size())])];
      for (int c = 0; c < hw; ++c) xbatch.at(r, c) = src.at(c);
    }
    const Tensor eps = normal_tensor({cfg.batch, d}, noise_rng);
    elbo.graph.forward({{"x", xbatch}, {"eps", eps}}, elbo.loss);

    TraceRow row;
    row.iter = iter;
    row.recon = elbo.graph.value_of(elbo.recon).at(0);
    row.kl = elbo.graph.value_of(elbo.kl).at(0);
    row.loss = elbo.graph.value_of(elbo.loss).at(0);
    NamedGrads grads = elbo.graph.backward(elbo.loss);

    if (iat_active && iter >= cfg.pretrain_iters) {
      const std::vector<iat::Triplet> triplets =
          iat::sample_triplet_batch(trip_pool, cfg.triplet_batch, trip_rng);
      const iat::ImageTripletBatch tb = iat::materialize_image_triplets(ds, trip_pool, triplets);
      ig->graph.forward({{"x1", tb.x1}, {"x2", tb.x2}, {"x3", tb.x3}, {"lambda", tb.lambda}}, ig->loss);
      row.iat = ig->graph.value_of(ig->loss).at(0);
      accumulate(grads, ig->graph.backward(ig->loss), cfg.lambda_iat);
      row.loss += cfg.lambda_iat * row.iat;
    }

    check_finite(row.loss, iter, result.trace);
    adam.step(model.params(), grads, cfg.lr);
    result.trace.push_back(row);
  }
  return result;
}

TrainResult train(models::GraphVae& model, const data::Dataset& ds, const TrainConfig& cfg) {
  if (ds.kind != data::DatasetKind::Graph) throw ConfigError("train: graph model needs a graph dataset");
  if (cfg.iters < 0 || cfg.batch < 1) throw ConfigError("train: bad iteration or batch count");

  const int n = model.config().n_nodes;
  const int d = model.config().latent_dim;
  if (ds.graph.n_nodes != n) {
    throw ConfigError("train: dataset has " + std::to_string(ds.graph.n_nodes) + " nodes, model expects " +
                      std::to_string(n));
  }

  // Materialize training snapshots and their normalized adjacencies once.
  std::vector<Tensor> snaps, ahats;
  for (int t = 1; t <= ds.graph.t_max; ++t) {
    if (ds.graph.stamp_split[static_cast<std::size_t>(t - 1)] == data::SplitTag::Train) {
      snaps.push_back(ds.graph.snapshot(t));
      ahats.push_back(models::GraphVae::normalized_adjacency(snaps.back()));
    }
  }
  if (snaps.empty()) throw ConfigError("train: dataset has no training snapshots");
  const int pool_size = static_cast<int>(snaps.size());

  const bool iat_active = cfg.iat_variant.has_value();
  std::vector<data::SequenceView> trip_pool;
  if (iat_active) {
    trip_pool = triplet_pool(ds, cfg);
    if (iat::uses_mlp(*cfg.iat_variant) && !iat::InterpMlp::params_present(model.params())) {
      Rng init_rng(Rng::mix(cfg.seed, kMlpInitStream));
      iat::InterpMlp::create_params(model.params(), n * d, init_rng);
    }
  }

  models::LossGraph elbo = model.make_elbo_graph();
  std::unique_ptr<iat::IatGraph> ig;
  if (iat_active) {
    ig = std::make_unique<iat::IatGraph>(make_graph_iat_graph(model, *cfg.iat_variant, cfg.iat_kind));
  }

  AdamState adam(model.params());
  Rng batch_rng(Rng::mix(cfg.seed, kBatchStream));
  Rng noise_rng(Rng::mix(cfg.seed, kNoiseStream));
  Rng trip_rng(Rng::mix(cfg.seed, kTripletStream));

  TrainResult result;
  result.trace.reserve(static_cast<std::size_t>(cfg.iters));

  for (int iter = 0; iter < cfg.iters; ++iter) {
    const std::vector<int> idx = draw_indices(pool_size, cfg.batch, batch_rng);
    const double inv_b = 1.0 / static_cast<double>(idx.size());

    TraceRow row;
    row.iter = iter;
    NamedGrads grads;
    for (int which : idx) {
      const Tensor eps = normal_tensor({n, d}, noise_rng);
      elbo.graph.forward({{"ahat", ahats[static_cast<std::size_t>(which)]},
                          {"a", snaps[static_cast<std::size_t>(which)]},
                          {"eps", eps}},
                         elbo.loss);
      row.recon += inv_b * elbo.graph.value_of(elbo.recon).at(0);
      row.kl += inv_b * elbo.graph.value_of(elbo.kl).at(0);
      row.loss += inv_b * elbo.graph.value_of(elbo.loss).at(0);
      accumulate(grads, elbo.graph.backward(elbo.loss), inv_b);
    }

    if (iat_active && iter >= cfg.pretrain_iters) {
      const std::vector<iat::Triplet> triplets =
          iat::sample_triplet_batch(trip_pool, cfg.triplet_batch, trip_rng);
      const double inv_t = 1.0 / static_cast<double>(triplets.size());
      for (const iat::Triplet& tr : triplets) {
        const data::SequenceView& seq = trip_pool[static_cast<std::size_t>(tr.seq)];
        Bindings inputs;
        inputs["ahat1"] = models::GraphVae::normalized_adjacency(data::fetch_sample(ds, seq, tr.p1));
        inputs["ahat3"] = models::GraphVae::normalized_adjacency(data::fetch_sample(ds, seq, tr.p3));
        inputs["lambda"] = Tensor({1, 1}, {interp::lambda_from_times(
                                               seq.ts[static_cast<std::size_t>(tr.p1)],
                                               seq.ts[static_cast<std::size_t>(tr.p2)],
                                               seq.ts[static_cast<std::size_t>(tr.p3)])});
        const Tensor x2 = data::fetch_sample(ds, seq, tr.p2);
        if (*cfg.iat_variant == iat::Variant::Latent || *cfg.iat_variant == iat::Variant::MlpLatent) {
          inputs["ahat2"] = models::GraphVae::normalized_adjacency(x2);
        } else {
          inputs["a2"] = x2;
        }
        ig->graph.forward(inputs, ig->loss);
        row.iat += inv_t * ig->graph.value_of(ig->loss).at(0);
        accumulate(grads, ig->graph.backward(ig->loss), cfg.lambda_iat * inv_t);
      }
      row.loss += cfg.lambda_iat * row.iat;
    }

    check_finite(row.loss, iter, result.trace);
    adam.step(model.params(), grads, cfg.lr);
    result.trace.push_back(row);
  }
  return result;
}

}  // namespace latentgeo::training
