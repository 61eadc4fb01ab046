#ifndef TOWE_COMMON_HPP
#define TOWE_COMMON_HPP

#include <Eigen/Core>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace towe {

template <typename S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <typename S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;

using MatF = Mat<float>;
using MatD = Mat<double>;

// Error hierarchy; the CLI maps ConfigError/FormatError-family to exit code 2,
// everything else to 1.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct FormatError : Error { using Error::Error; };
struct AnnotationError : Error { using Error::Error; };
struct JoinError : Error { using Error::Error; };
struct TreeError : Error { using Error::Error; };
struct LoadError : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };
struct FeatureError : Error { using Error::Error; };
struct DimensionError : Error { using Error::Error; };
struct PreconditionError : Error { using Error::Error; };
struct InferenceError : Error { using Error::Error; };
struct IoError : Error { using Error::Error; };

// Half-open token interval [start, end).
struct Span {
  int start = 0;
  int end = 0;

  int size() const { return end - start; }
  bool contains(int i) const { return i >= start && i < end; }
  bool operator==(const Span&) const = default;
  auto operator<=>(const Span&) const = default;
};

enum class BioTag : std::uint8_t { B = 0, I = 1, O = 2 };

inline char bio_char(BioTag t) {
  switch (t) {
    case BioTag::B: return 'B';
    case BioTag::I: return 'I';
    default: return 'O';
  }
}

inline BioTag bio_from_char(char c) {
  switch (c) {
    case 'B': return BioTag::B;
    case 'I': return BioTag::I;
    case 'O': return BioTag::O;
    default: throw FormatError(std::string("invalid BIO tag '") + c + "'");
  }
}

// FNV-1a, used for vocab fingerprints and run-directory names.
inline std::uint64_t fnv1a(const std::string& s, std::uint64_t h = 1469598103934665603ull) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::uint64_t fnv1a(const std::vector<std::string>& items) {
  std::uint64_t h = 1469598103934665603ull;
  for (const auto& s : items) {
    h = fnv1a(s, h);
    h = fnv1a("\x1f", h);
  }
  return h;
}

}  // namespace towe

#endif
