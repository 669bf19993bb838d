#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "latentgeo/tensor.hpp"

namespace latentgeo::data {

enum class SplitTag { Train, Val, Test };
std::string to_string(SplitTag t);
SplitTag split_from_string(const std::string& s);

// Per-sequence split sizes; defaults follow the 1/2, 1/4, rest proportions.
struct SplitSpec {
  int train = 0;
  int val = 0;
  int test = 0;
  int total() const { return train + val + test; }
};
SplitSpec default_split(int sequence_length);

struct ImageSample {
  double t;  // rotation angle in degrees, [0, 180]
  Tensor image;
  SplitTag split = SplitTag::Train;
};

struct ImageSequence {
  int object_id = 0;
  std::uint64_t style_seed = 0;
  std::vector<ImageSample> samples;  // sorted by t, unique t per object
};

struct ImageDataset {
  std::uint64_t master_seed = 0;
  int image_size = 32;
  std::vector<ImageSequence> objects;
};

struct GraphEdge {
  int src = 0;
  int dst = 0;
  int t_birth = 0;
};

// Monotonically growing directed citation graph. Snapshots accumulate edges;
// stamp t covers every edge born at or before t.
struct GraphDataset {
  std::uint64_t master_seed = 0;
  int n_nodes = 0;
  int t_max = 0;
  double attach_exponent = 1.0;
  std::vector<GraphEdge> edges;
  std::vector<SplitTag> stamp_split;  // index t-1 for stamps 1..t_max

  Tensor snapshot(int t) const;  // {0,1} adjacency, zero diagonal
};

enum class DatasetKind { Image, Graph };
std::string to_string(DatasetKind k);

struct Dataset {
  DatasetKind kind = DatasetKind::Image;
  ImageDataset image;
  GraphDataset graph;
};

// Deterministic grayscale raster of a seed-derived irregular polygon (6-10
// vertices) plus an off-center disc marker, rotated by `angle_degrees` about
// the polygon centroid. 4x4 subsamples per pixel; coverage mapped to [-1,1].
Tensor render_shape(std::uint64_t style_seed, double angle_degrees, int size = 32);

// n_objects sequences of n_angles views at angles drawn uniformly in
// [0, 180]. Pure function of master_seed; per-object streams are derived so
// objects are independent.
ImageDataset generate_image_dataset(int n_objects, int n_angles, std::uint64_t master_seed);

// Node 0 is the most-cited center core; every later node cites it plus
// 1+Poisson(2) earlier nodes chosen with probability proportional to
// (in-degree + 1)^attach_exponent. Node births are spread over [1, t_max].
GraphDataset generate_citation_graph(int n_nodes, int t_max, std::uint64_t master_seed,
                                     double attach_exponent = 1.0);

// Random disjoint covering partition, per object / per stamp sequence.
void assign_split(ImageDataset& ds, const SplitSpec& spec, std::uint64_t seed);
void assign_split(GraphDataset& ds, const SplitSpec& spec, std::uint64_t seed);

// Directory layout: manifest.json + one LGT1 file per image, or
// manifest.json + edges.csv (columns src,dst,t_birth) for graphs.
void save_dataset(const Dataset& ds, const std::string& dir);
Dataset load_dataset(const std::string& dir);

// Flat per-sequence view of one split, for triplet pools and evaluation.
struct SequenceView {
  int object_id = 0;
  std::vector<double> ts;        // ascending
  std::vector<int> sample_index; // position in the owning sequence / stamp value
};
std::vector<SequenceView> split_view(const Dataset& ds, SplitTag tag);

// Fetches the sample tensor behind a view entry (image or graph snapshot).
Tensor fetch_sample(const Dataset& ds, const SequenceView& seq, int pos);

}  // namespace latentgeo::data
