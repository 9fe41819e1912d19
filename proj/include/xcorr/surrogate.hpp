#pragma once

// Randomized panels that destroy or keep selected parts of the
// cross-correlation structure. Row i always draws from RNG stream i, so
// outputs depend only on (kind, seed, panel).

#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "xcorr/error.hpp"
#include "xcorr/panel.hpp"
#include "xcorr/rng.hpp"

namespace xcorr {

enum class SurrogateKind {
  rotate_free,
  rotate_daily,
  shuffle_signs,
  shuffle_magnitudes,
  signs_only,
  magnitudes_only,
};

inline constexpr SurrogateKind kAllSurrogateKinds[] = {
    SurrogateKind::rotate_free,   SurrogateKind::rotate_daily,
    SurrogateKind::shuffle_signs, SurrogateKind::shuffle_magnitudes,
    SurrogateKind::signs_only,    SurrogateKind::magnitudes_only,
};

inline std::string_view to_string(SurrogateKind kind) {
  switch (kind) {
    case SurrogateKind::rotate_free: return "rotate_free";
    case SurrogateKind::rotate_daily: return "rotate_daily";
    case SurrogateKind::shuffle_signs: return "shuffle_signs";
    case SurrogateKind::shuffle_magnitudes: return "shuffle_magnitudes";
    case SurrogateKind::signs_only: return "signs_only";
    case SurrogateKind::magnitudes_only: return "magnitudes_only";
  }
  return "unknown";
}

inline std::optional<SurrogateKind> parse_surrogate_kind(std::string_view name) {
  for (auto kind : kAllSurrogateKinds)
    if (to_string(kind) == name) return kind;
  return std::nullopt;
}

struct SurrogateSpec {
  SurrogateKind kind = SurrogateKind::rotate_free;
  std::uint64_t seed = 0;
};

/// Cyclic shift of every row: out_i[j] = in_i[(j + offsets[i]) mod T].
inline ReturnPanel rotate_rows(const ReturnPanel& r, std::span<const std::size_t> offsets) {
  if (offsets.size() != r.n_assets())
    throw Error(ErrorKind::structural, "rotate_rows: one offset per row required");
  const std::size_t t = r.length();
  RowMatrix out(r.values().rows(), r.values().cols());
  for (std::size_t i = 0; i < r.n_assets(); ++i) {
    const auto in = r.row(i);
    const std::size_t off = offsets[i] % t;
    for (std::size_t j = 0; j < t; ++j)
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = in[(j + off) % t];
  }
  return r.with_values(std::move(out), r.standardized());
}

inline ReturnPanel rotate_free(const ReturnPanel& r, std::uint64_t seed) {
  std::vector<std::size_t> offsets(r.n_assets());
  for (std::size_t i = 0; i < offsets.size(); ++i)
    offsets[i] = static_cast<std::size_t>(CounterRng(seed, i).below(r.length()));
  return rotate_rows(r, offsets);
}

/// Rotation by whole trading days. A trailing partial day is trimmed first.
inline ReturnPanel rotate_daily(const ReturnPanel& r, std::uint64_t seed,
                                Warnings* warnings = nullptr) {
  const auto bpd = static_cast<std::size_t>(r.bars_per_day());
  const std::size_t days = r.length() / bpd;
  if (days < 1)
    throw Error(ErrorKind::invalid_input, "rotate_daily: panel shorter than one trading day");
  ReturnPanel whole = r;
  if (days * bpd != r.length()) {
    warn(warnings, "rotate_daily: trimmed " + std::to_string(r.length() - days * bpd) +
                       " trailing bars of a partial day");
    RowMatrix trimmed = r.values().leftCols(static_cast<Eigen::Index>(days * bpd));
    whole = r.with_values(std::move(trimmed), false);
  }
  std::vector<std::size_t> offsets(whole.n_assets());
  for (std::size_t i = 0; i < offsets.size(); ++i)
    offsets[i] = bpd * static_cast<std::size_t>(CounterRng(seed, i).below(days));
  return rotate_rows(whole, offsets);
}

namespace detail {

enum class ShufflePart { signs, magnitudes };

inline ReturnPanel shuffle_part(const ReturnPanel& r, std::uint64_t seed, ShufflePart part) {
  const auto sm = decompose(r);
  const std::size_t t = r.length();
  RowMatrix out(r.values().rows(), r.values().cols());
  std::vector<std::size_t> perm(t);
  for (std::size_t i = 0; i < r.n_assets(); ++i) {
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    CounterRng(seed, i).shuffle(std::span<std::size_t>(perm));
    const auto row = static_cast<Eigen::Index>(i);
    for (std::size_t j = 0; j < t; ++j) {
      const auto jj = static_cast<Eigen::Index>(j);
      const auto pj = static_cast<Eigen::Index>(perm[j]);
      out(row, jj) = part == ShufflePart::signs ? sm.signs(row, pj) * sm.magnitudes(row, jj)
                                                : sm.signs(row, jj) * sm.magnitudes(row, pj);
    }
  }
  return r.with_values(std::move(out), false);
}

inline ReturnPanel standardized_part(const ReturnPanel& r, const RowMatrix& part,
                                     std::string_view label, Warnings* warnings) {
  const auto keep = varying_rows(part);
  for (std::size_t i = 0, k = 0; i < r.n_assets(); ++i) {
    if (k < keep.size() && keep[k] == i) {
      ++k;
      continue;
    }
    warn(warnings, std::string(label) + ": asset " + r.assets()[i] +
                       " has a constant series; dropped");
  }
  RowMatrix m(static_cast<Eigen::Index>(keep.size()), part.cols());
  std::vector<std::string> names;
  for (std::size_t k = 0; k < keep.size(); ++k) {
    m.row(static_cast<Eigen::Index>(k)) = part.row(static_cast<Eigen::Index>(keep[k]));
    names.push_back(r.assets()[keep[k]]);
  }
  standardize_rows(m, names);
  return ReturnPanel(std::move(names), std::move(m), r.bars_per_day(), r.dt_seconds(), true);
}

}  // namespace detail

/// Permutes each row's sign sequence; magnitudes stay in place.
inline ReturnPanel shuffle_signs(const ReturnPanel& r, std::uint64_t seed) {
  return detail::shuffle_part(r, seed, detail::ShufflePart::signs);
}

/// Permutes each row's magnitude sequence; signs stay in place.
inline ReturnPanel shuffle_magnitudes(const ReturnPanel& r, std::uint64_t seed) {
  return detail::shuffle_part(r, seed, detail::ShufflePart::magnitudes);
}

/// Standardized sign series. Rows with a constant sign are dropped.
inline ReturnPanel signs_only(const ReturnPanel& r, Warnings* warnings = nullptr) {
  return detail::standardized_part(r, decompose(r).signs, "signs_only", warnings);
}

/// Standardized magnitude series. Rows with constant magnitude are dropped.
inline ReturnPanel magnitudes_only(const ReturnPanel& r, Warnings* warnings = nullptr) {
  return detail::standardized_part(r, decompose(r).magnitudes, "magnitudes_only", warnings);
}

inline ReturnPanel make_surrogate(const ReturnPanel& r, const SurrogateSpec& spec,
                                  Warnings* warnings = nullptr) {
  switch (spec.kind) {
    case SurrogateKind::rotate_free: return rotate_free(r, spec.seed);
    case SurrogateKind::rotate_daily: return rotate_daily(r, spec.seed, warnings);
    case SurrogateKind::shuffle_signs: return shuffle_signs(r, spec.seed);
    case SurrogateKind::shuffle_magnitudes: return shuffle_magnitudes(r, spec.seed);
    case SurrogateKind::signs_only: return signs_only(r, warnings);
    case SurrogateKind::magnitudes_only: return magnitudes_only(r, warnings);
  }
  throw Error(ErrorKind::invalid_input, "unknown surrogate kind");
}

}  // namespace xcorr
