#include "data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include "errors.hpp"

namespace scfm {

DataKind parse_data_kind(const std::string& name) {
    if (name == "gaussians8") return DataKind::Gaussians8;
    if (name == "checkerboard") return DataKind::Checkerboard;
    if (name == "moons") return DataKind::Moons;
    if (name == "spirals") return DataKind::Spirals;
    throw ConfigError("unknown dataset kind: " + name);
}

std::string data_kind_name(DataKind k) {
    switch (k) {
        case DataKind::Gaussians8: return "gaussians8";
        case DataKind::Checkerboard: return "checkerboard";
        case DataKind::Moons: return "moons";
        case DataKind::Spirals: return "spirals";
    }
    throw ConfigError("unknown dataset kind");
}

int data_class_count(DataKind k) { return k == DataKind::Gaussians8 ? 8 : 2; }

namespace {

constexpr double kPi = std::numbers::pi;

double clamp_box(double v) { return std::min(8.0, std::max(-8.0, v)); }

void gaussians8_draw(const DatasetSpec& s, Rng& rng, double* out, int& label) {
    label = rng.uniform_int(8);
    double ang = 2.0 * kPi * label / 8.0;
    out[0] = 4.0 * std::cos(ang) + s.sigma * rng.gaussian();
    out[1] = 4.0 * std::sin(ang) + s.sigma * rng.gaussian();
}

void checkerboard_draw(const DatasetSpec&, Rng& rng, double* out, int& label) {
    out[0] = rng.uniform(-4.0, 4.0);
    out[1] = rng.uniform(-4.0, 4.0);
    int i = std::min(7, static_cast<int>(std::floor(out[0] + 4.0)));
    int j = std::min(7, static_cast<int>(std::floor(out[1] + 4.0)));
    label = (i + j) & 1;
}

void moons_draw(const DatasetSpec& s, Rng& rng, double* out, int& label) {
    label = rng.uniform_int(2);
    double phi = kPi * rng.uniform();
    double x, y;
    if (label == 0) {
        x = std::cos(phi);
        y = std::sin(phi);
    } else {
        x = 1.0 - std::cos(phi);
        y = 0.5 - std::sin(phi);
    }
    out[0] = 2.5 * (x - 0.5) + s.sigma * rng.gaussian();
    out[1] = 2.5 * (y - 0.25) + s.sigma * rng.gaussian();
}

void spirals_draw(const DatasetSpec& s, Rng& rng, double* out, int& label) {
    label = rng.uniform_int(2);
    double phi = 3.0 * kPi * std::sqrt(rng.uniform());
    double r = 4.0 * phi / (3.0 * kPi);
    double sign = label == 0 ? 1.0 : -1.0;
    out[0] = sign * r * std::cos(phi) + s.sigma * rng.gaussian();
    out[1] = sign * r * std::sin(phi) + s.sigma * rng.gaussian();
}

}  // namespace

LabeledPoints sample_dataset(const DatasetSpec& spec, int count, Rng& rng) {
    if (count <= 0) throw ConfigError("dataset size must be positive");
    if (spec.sigma < 0.0) throw ConfigError("noise scale must be >= 0");
    LabeledPoints out;
    out.x = Tensor::zeros({count, 2});
    out.labels.resize(count);
    out.class_count = data_class_count(spec.kind);
    for (int i = 0; i < count; ++i) {
        double* p = out.x.row_ptr(i);
        int label = 0;
        switch (spec.kind) {
            case DataKind::Gaussians8: gaussians8_draw(spec, rng, p, label); break;
            case DataKind::Checkerboard: checkerboard_draw(spec, rng, p, label); break;
            case DataKind::Moons: moons_draw(spec, rng, p, label); break;
            case DataKind::Spirals: spirals_draw(spec, rng, p, label); break;
        }
        p[0] = clamp_box(p[0]);
        p[1] = clamp_box(p[1]);
        out.labels[i] = label;
    }
    return out;
}

LabeledPoints few_shot_subset(const LabeledPoints& data, int m, uint64_t seed) {
    if (m <= 0 || m > data.size()) throw ConfigError("subset size out of range");
    Rng rng = Rng::substream(seed, "few-shot");
    std::vector<int> idx;
    if (data.class_count > 0) {
        // Conditional few-shot batches must exercise every label the sampler
        // will ask for, so the draw cycles classes instead of pooling them.
        std::vector<std::vector<int>> by_class(data.class_count);
        for (int i = 0; i < data.size(); ++i) by_class[data.labels[i]].push_back(i);
        for (auto& pool : by_class) {
            for (size_t i = 0; i + 1 < pool.size(); ++i) {
                size_t j = i + rng.uniform_int(static_cast<int>(pool.size() - i));
                std::swap(pool[i], pool[j]);
            }
        }
        std::vector<size_t> taken(data.class_count, 0);
        for (int c = 0; static_cast<int>(idx.size()) < m; c = (c + 1) % data.class_count) {
            auto& pool = by_class[c];
            if (taken[c] < pool.size()) idx.push_back(pool[taken[c]++]);
        }
    } else {
        idx.resize(data.size());
        for (int i = 0; i < data.size(); ++i) idx[i] = i;
        for (int i = 0; i < m; ++i) {
            int j = i + rng.uniform_int(data.size() - i);
            std::swap(idx[i], idx[j]);
        }
    }
    LabeledPoints out;
    out.x = Tensor::zeros({m, 2});
    out.labels.resize(m);
    out.class_count = data.class_count;
    for (int i = 0; i < m; ++i) {
        out.x.at(i, 0) = data.x.at(idx[i], 0);
        out.x.at(i, 1) = data.x.at(idx[i], 1);
        out.labels[i] = data.labels[idx[i]];
    }
    return out;
}

Normalization compute_normalization(const LabeledPoints& data) {
    Normalization n;
    int count = data.size();
    if (count == 0) throw ConfigError("cannot normalize an empty dataset");
    for (int j = 0; j < 2; ++j) {
        double s = 0.0;
        for (int i = 0; i < count; ++i) s += data.x.at(i, j);
        n.mean[j] = s / count;
        double q = 0.0;
        for (int i = 0; i < count; ++i) {
            double d = data.x.at(i, j) - n.mean[j];
            q += d * d;
        }
        double sd = std::sqrt(q / count);
        n.std[j] = sd > 1e-12 ? sd : 1.0;
    }
    return n;
}

Tensor normalize(const Tensor& x, const Normalization& n) {
    Tensor out = x;
    for (int i = 0; i < out.rows(); ++i)
        for (int j = 0; j < 2; ++j) out.at(i, j) = (out.at(i, j) - n.mean[j]) / n.std[j];
    return out;
}

Tensor denormalize(const Tensor& x, const Normalization& n) {
    Tensor out = x;
    for (int i = 0; i < out.rows(); ++i)
        for (int j = 0; j < 2; ++j) out.at(i, j) = out.at(i, j) * n.std[j] + n.mean[j];
    return out;
}

void write_points_csv(const std::string& path, const Tensor& x, const std::vector<int>& labels) {
    if (static_cast<int>(labels.size()) != x.rows()) throw ShapeError("label count vs points");
    std::ofstream f(path);
    if (!f) throw Error("cannot write " + path);
    f << "x0,x1,label\n";
    f.precision(17);
    for (int i = 0; i < x.rows(); ++i)
        f << x.at(i, 0) << "," << x.at(i, 1) << "," << labels[i] << "\n";
    if (!f) throw Error("write failed for " + path);
}

}  // namespace scfm
