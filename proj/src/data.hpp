#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rng.hpp"
#include "tensor.hpp"

namespace scfm {

enum class DataKind { Gaussians8, Checkerboard, Moons, Spirals };

DataKind parse_data_kind(const std::string& name);
std::string data_kind_name(DataKind k);
int data_class_count(DataKind k);

struct DatasetSpec {
    DataKind kind = DataKind::Gaussians8;
    int size = 10000;
    uint64_t seed = 0;
    double sigma = 0.3;  // per-kind noise scale; checkerboard ignores it
};

struct LabeledPoints {
    Tensor x;  // [n,2]
    std::vector<int> labels;
    int class_count = 0;

    int size() const { return x.rows(); }
};

// Mean/std per coordinate; training runs on standardized data and samples are
// mapped back through these constants.
struct Normalization {
    double mean[2] = {0.0, 0.0};
    double std[2] = {1.0, 1.0};
};

LabeledPoints sample_dataset(const DatasetSpec& spec, int count, Rng& rng);
LabeledPoints few_shot_subset(const LabeledPoints& data, int m, uint64_t seed);

Normalization compute_normalization(const LabeledPoints& data);
Tensor normalize(const Tensor& x, const Normalization& n);
Tensor denormalize(const Tensor& x, const Normalization& n);

void write_points_csv(const std::string& path, const Tensor& x, const std::vector<int>& labels);

}  // namespace scfm
