#include "checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace scfm {

namespace {

constexpr char kMagic[4] = {'S', 'C', 'F', 'M'};
constexpr uint32_t kVersion = 1;

void put_u32(std::ofstream& f, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    f.write(reinterpret_cast<const char*>(b), 4);
}

void put_f64(std::ofstream& f, double d) {
    uint64_t v = std::bit_cast<uint64_t>(d);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    f.write(reinterpret_cast<const char*>(b), 8);
}

uint32_t get_u32(std::ifstream& f, const std::string& what) {
    unsigned char b[4];
    if (!f.read(reinterpret_cast<char*>(b), 4)) throw FormatError("truncated checkpoint at " + what);
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

double get_f64(std::ifstream& f, const std::string& what) {
    unsigned char b[8];
    if (!f.read(reinterpret_cast<char*>(b), 8)) throw FormatError("truncated checkpoint at " + what);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
    return std::bit_cast<double>(v);
}

Tensor scalar_list(std::initializer_list<double> vs) {
    Tensor t;
    t.shape = {static_cast<int>(vs.size())};
    t.data.assign(vs.begin(), vs.end());
    return t;
}

const Tensor& need(const ArrayMap& m, const std::string& key) {
    auto it = m.find(key);
    if (it == m.end()) throw FormatError("checkpoint missing array " + key);
    return it->second;
}

void expect_shape(const Tensor& t, const std::vector<int>& shape, const std::string& key) {
    if (t.shape != shape) {
        Tensor probe;
        probe.shape = shape;
        throw ShapeError("checkpoint array " + key + " has shape " + t.shape_str() + ", expected " +
                         probe.shape_str());
    }
}

void pack_theta(ArrayMap& m, const std::string& prefix, const Theta& th) {
    const NetConfig& c = th.cfg;
    m[prefix + "/config"] =
        scalar_list({static_cast<double>(c.input_dim), static_cast<double>(c.hidden_dim),
                     static_cast<double>(c.num_hidden_layers), static_cast<double>(c.time_embed_dim),
                     static_cast<double>(c.class_count), static_cast<double>(c.step_embed_dim)});
    for (size_t k = 0; k < th.w.size(); ++k) {
        m[prefix + "/w" + std::to_string(k)] = th.w[k];
        m[prefix + "/b" + std::to_string(k)] = th.b[k];
    }
    if (c.conditional()) m[prefix + "/class_embed"] = th.class_embed;
}

Theta unpack_theta(const ArrayMap& m, const std::string& prefix) {
    const Tensor& cfg_arr = need(m, prefix + "/config");
    expect_shape(cfg_arr, {6}, prefix + "/config");
    NetConfig c;
    c.input_dim = static_cast<int>(cfg_arr.data[0]);
    c.hidden_dim = static_cast<int>(cfg_arr.data[1]);
    c.num_hidden_layers = static_cast<int>(cfg_arr.data[2]);
    c.time_embed_dim = static_cast<int>(cfg_arr.data[3]);
    c.class_count = static_cast<int>(cfg_arr.data[4]);
    c.step_embed_dim = static_cast<int>(cfg_arr.data[5]);
    c.validate();
    Theta th;
    th.cfg = c;
    for (int k = 0; k < c.dense_layers(); ++k) {
        std::string wk = prefix + "/w" + std::to_string(k);
        std::string bk = prefix + "/b" + std::to_string(k);
        Tensor w = need(m, wk);
        expect_shape(w, {c.layer_out(k), c.layer_in(k)}, wk);
        Tensor b = need(m, bk);
        expect_shape(b, {c.layer_out(k)}, bk);
        th.w.push_back(std::move(w));
        th.b.push_back(std::move(b));
    }
    if (c.conditional()) {
        Tensor e = need(m, prefix + "/class_embed");
        expect_shape(e, {c.class_count + 1, c.time_embed_dim}, prefix + "/class_embed");
        th.class_embed = std::move(e);
    }
    return th;
}

void pack_norm(ArrayMap& m, const Normalization& n) {
    m["norm/mean"] = scalar_list({n.mean[0], n.mean[1]});
    m["norm/std"] = scalar_list({n.std[0], n.std[1]});
}

Normalization unpack_norm(const ArrayMap& m) {
    const Tensor& mean = need(m, "norm/mean");
    const Tensor& sd = need(m, "norm/std");
    expect_shape(mean, {2}, "norm/mean");
    expect_shape(sd, {2}, "norm/std");
    Normalization n;
    n.mean[0] = mean.data[0];
    n.mean[1] = mean.data[1];
    n.std[0] = sd.data[0];
    n.std[1] = sd.data[1];
    return n;
}

void pack_data_spec(ArrayMap& m, const DatasetSpec& d) {
    // Seed bits pass through bit_cast untouched; the payload is raw bytes.
    m["data/meta"] = scalar_list({static_cast<double>(static_cast<int>(d.kind)),
                                  static_cast<double>(d.size), d.sigma,
                                  std::bit_cast<double>(d.seed)});
}

DatasetSpec unpack_data_spec(const ArrayMap& m) {
    const Tensor& t = need(m, "data/meta");
    expect_shape(t, {4}, "data/meta");
    DatasetSpec d;
    int kind = static_cast<int>(t.data[0]);
    if (kind < 0 || kind > 3) throw FormatError("unknown dataset kind " + std::to_string(kind));
    d.kind = static_cast<DataKind>(kind);
    d.size = static_cast<int>(t.data[1]);
    d.sigma = t.data[2];
    d.seed = std::bit_cast<uint64_t>(t.data[3]);
    return d;
}

void pack_kind(ArrayMap& m, CkptKind k) { m["kind"] = scalar_list({static_cast<double>(static_cast<int>(k))}); }

CkptKind unpack_kind(const ArrayMap& m) {
    const Tensor& k = need(m, "kind");
    expect_shape(k, {1}, "kind");
    int v = static_cast<int>(k.data[0]);
    if (v < 0 || v > 2) throw FormatError("unknown checkpoint kind " + std::to_string(v));
    return static_cast<CkptKind>(v);
}

}  // namespace

void save_arrays(const std::string& path, const ArrayMap& arrays) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot write " + path);
    f.write(kMagic, 4);
    put_u32(f, kVersion);
    put_u32(f, static_cast<uint32_t>(arrays.size()));
    for (const auto& [name, t] : arrays) {
        put_u32(f, static_cast<uint32_t>(name.size()));
        f.write(name.data(), static_cast<std::streamsize>(name.size()));
        put_u32(f, static_cast<uint32_t>(t.shape.size()));
        for (int d : t.shape) put_u32(f, static_cast<uint32_t>(d));
        for (double v : t.data) put_f64(f, v);
    }
    if (!f) throw Error("write failed for " + path);
}

ArrayMap load_arrays(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("cannot read " + path);
    char magic[4];
    if (!f.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
        throw FormatError("bad checkpoint magic in " + path);
    uint32_t version = get_u32(f, "version");
    if (version != kVersion)
        throw FormatError("unsupported checkpoint version " + std::to_string(version));
    uint32_t count = get_u32(f, "array count");
    ArrayMap out;
    for (uint32_t i = 0; i < count; ++i) {
        uint32_t name_len = get_u32(f, "name length");
        std::string name(name_len, '\0');
        if (!f.read(name.data(), name_len)) throw FormatError("truncated checkpoint at array name");
        uint32_t rank = get_u32(f, name + " rank");
        std::vector<int> shape(rank);
        for (uint32_t r = 0; r < rank; ++r) shape[r] = static_cast<int>(get_u32(f, name + " dims"));
        int64_t n = shape_numel(shape);
        Tensor t;
        t.shape = std::move(shape);
        t.data.resize(static_cast<size_t>(n));
        for (int64_t j = 0; j < n; ++j) t.data[static_cast<size_t>(j)] = get_f64(f, name + " payload");
        out.emplace(std::move(name), std::move(t));
    }
    return out;
}

void save_teacher(const std::string& path, const Theta& theta, const Normalization& norm,
                  const DatasetSpec& data) {
    ArrayMap m;
    pack_kind(m, CkptKind::Teacher);
    pack_theta(m, "net", theta);
    pack_norm(m, norm);
    pack_data_spec(m, data);
    save_arrays(path, m);
}

TeacherCkpt load_teacher(const std::string& path) {
    ArrayMap m = load_arrays(path);
    if (unpack_kind(m) != CkptKind::Teacher) throw FormatError(path + " is not a teacher checkpoint");
    return TeacherCkpt{unpack_theta(m, "net"), unpack_norm(m), unpack_data_spec(m)};
}

void save_student(const std::string& path, const Theta& theta0, const LoraDelta& delta,
                  const EmaState& ema, const OptimState& opt, const Normalization& norm,
                  const DatasetSpec& data) {
    ArrayMap m;
    pack_kind(m, CkptKind::Student);
    pack_theta(m, "net", theta0);
    pack_norm(m, norm);
    pack_data_spec(m, data);
    m["lora/meta"] = scalar_list({static_cast<double>(delta.rank), delta.alpha});
    for (size_t k = 0; k < delta.a.size(); ++k) {
        m["lora/a" + std::to_string(k)] = delta.a[k];
        m["lora/b" + std::to_string(k)] = delta.bm[k];
    }
    m["ema/meta"] = scalar_list({ema.has_fast ? 1.0 : 0.0, static_cast<double>(ema.iteration)});
    for (size_t k = 0; k < ema.slow.d.size(); ++k) m["ema/slow" + std::to_string(k)] = ema.slow.d[k];
    if (ema.has_fast)
        for (size_t k = 0; k < ema.fast.d.size(); ++k) m["ema/fast" + std::to_string(k)] = ema.fast.d[k];
    m["opt/meta"] = scalar_list({static_cast<double>(opt.step), opt.cfg.lr, opt.cfg.beta1,
                                 opt.cfg.beta2, opt.cfg.weight_decay, opt.cfg.eps});
    for (size_t k = 0; k < opt.m.size(); ++k) {
        m["opt/m" + std::to_string(k)] = opt.m[k];
        m["opt/v" + std::to_string(k)] = opt.v[k];
    }
    save_arrays(path, m);
}

StudentCkpt load_student(const std::string& path) {
    ArrayMap m = load_arrays(path);
    if (unpack_kind(m) != CkptKind::Student) throw FormatError(path + " is not a student checkpoint");
    StudentCkpt s;
    s.theta0 = unpack_theta(m, "net");
    s.norm = unpack_norm(m);
    s.data = unpack_data_spec(m);
    const NetConfig& c = s.theta0.cfg;

    const Tensor& lmeta = need(m, "lora/meta");
    expect_shape(lmeta, {2}, "lora/meta");
    s.delta.rank = static_cast<int>(lmeta.data[0]);
    s.delta.alpha = lmeta.data[1];
    for (int k = 0; k < c.dense_layers(); ++k) {
        std::string ak = "lora/a" + std::to_string(k);
        std::string bk = "lora/b" + std::to_string(k);
        Tensor a = need(m, ak);
        expect_shape(a, {s.delta.rank, c.layer_in(k)}, ak);
        Tensor b = need(m, bk);
        expect_shape(b, {c.layer_out(k), s.delta.rank}, bk);
        s.delta.a.push_back(std::move(a));
        s.delta.bm.push_back(std::move(b));
    }

    const Tensor& emeta = need(m, "ema/meta");
    expect_shape(emeta, {2}, "ema/meta");
    s.ema.has_fast = emeta.data[0] != 0.0;
    s.ema.iteration = static_cast<int64_t>(emeta.data[1]);
    for (int k = 0; k < c.dense_layers(); ++k) {
        std::string sk = "ema/slow" + std::to_string(k);
        Tensor d = need(m, sk);
        expect_shape(d, {c.layer_out(k), c.layer_in(k)}, sk);
        s.ema.slow.d.push_back(std::move(d));
    }
    if (s.ema.has_fast)
        for (int k = 0; k < c.dense_layers(); ++k) {
            std::string fk = "ema/fast" + std::to_string(k);
            Tensor d = need(m, fk);
            expect_shape(d, {c.layer_out(k), c.layer_in(k)}, fk);
            s.ema.fast.d.push_back(std::move(d));
        }

    const Tensor& ometa = need(m, "opt/meta");
    expect_shape(ometa, {6}, "opt/meta");
    s.opt.step = static_cast<int64_t>(ometa.data[0]);
    s.opt.cfg.lr = ometa.data[1];
    s.opt.cfg.beta1 = ometa.data[2];
    s.opt.cfg.beta2 = ometa.data[3];
    s.opt.cfg.weight_decay = ometa.data[4];
    s.opt.cfg.eps = ometa.data[5];
    for (int k = 0; k < 2 * c.dense_layers(); ++k) {
        std::string mk = "opt/m" + std::to_string(k);
        std::string vk = "opt/v" + std::to_string(k);
        s.opt.m.push_back(need(m, mk));
        s.opt.v.push_back(need(m, vk));
    }
    return s;
}

void save_shortcut(const std::string& path, const Theta& theta, const Theta& theta_ema,
                   const Normalization& norm, const DatasetSpec& data) {
    ArrayMap m;
    pack_kind(m, CkptKind::Shortcut);
    pack_theta(m, "net", theta);
    pack_theta(m, "ema", theta_ema);
    pack_norm(m, norm);
    pack_data_spec(m, data);
    save_arrays(path, m);
}

ShortcutCkpt load_shortcut(const std::string& path) {
    ArrayMap m = load_arrays(path);
    if (unpack_kind(m) != CkptKind::Shortcut) throw FormatError(path + " is not a baseline checkpoint");
    return ShortcutCkpt{unpack_theta(m, "net"), unpack_theta(m, "ema"), unpack_norm(m),
                        unpack_data_spec(m)};
}

CkptKind checkpoint_kind(const std::string& path) { return unpack_kind(load_arrays(path)); }

}  // namespace scfm
