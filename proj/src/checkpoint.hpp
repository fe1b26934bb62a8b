#pragma once

#include <map>
#include <string>

#include "data.hpp"
#include "distill.hpp"
#include "net.hpp"
#include "optim.hpp"

namespace scfm {

// Container format: magic "SCFM", u32 version, u32 array count, then per array
// name (u32 length + bytes), u32 rank, u32 dims, little-endian f64 payload.
// std::map keeps emission order sorted, so equal content means equal bytes.
using ArrayMap = std::map<std::string, Tensor>;

void save_arrays(const std::string& path, const ArrayMap& arrays);
ArrayMap load_arrays(const std::string& path);

enum class CkptKind { Teacher = 0, Student = 1, Shortcut = 2 };

// Checkpoints carry the dataset recipe alongside the weights, so eval and
// sampling need nothing but the file.
struct TeacherCkpt {
    Theta theta;
    Normalization norm;
    DatasetSpec data;
};

struct StudentCkpt {
    Theta theta0;
    LoraDelta delta;
    EmaState ema;
    OptimState opt;
    Normalization norm;
    DatasetSpec data;
};

struct ShortcutCkpt {
    Theta theta;
    Theta theta_ema;
    Normalization norm;
    DatasetSpec data;
};

void save_teacher(const std::string& path, const Theta& theta, const Normalization& norm,
                  const DatasetSpec& data);
TeacherCkpt load_teacher(const std::string& path);

void save_student(const std::string& path, const Theta& theta0, const LoraDelta& delta,
                  const EmaState& ema, const OptimState& opt, const Normalization& norm,
                  const DatasetSpec& data);
StudentCkpt load_student(const std::string& path);

void save_shortcut(const std::string& path, const Theta& theta, const Theta& theta_ema,
                   const Normalization& norm, const DatasetSpec& data);
ShortcutCkpt load_shortcut(const std::string& path);

CkptKind checkpoint_kind(const std::string& path);

}  // namespace scfm
