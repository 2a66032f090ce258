#pragma once

#include "oracles.hpp"
#include "srcox/survival.hpp"

#include <vector>

namespace testing_support {

// The instance's design columns become the linear block of a dataset.
inline srcox::SurvivalDataset to_dataset(const oracle::Instance& d) {
  std::vector<srcox::Subject> subjects;
  for (std::size_t i = 0; i < d.time.size(); ++i) {
    srcox::Subject s;
    s.time = d.time[i];
    s.event = d.event[i];
    for (Eigen::Index k = 0; k < d.w.cols(); ++k)
      s.covariates.push_back(d.w(static_cast<Eigen::Index>(i), k));
    subjects.push_back(std::move(s));
  }
  return srcox::SurvivalDataset(std::move(subjects), static_cast<std::size_t>(d.w.cols()), 0);
}

inline srcox::DesignMatrix to_design(const oracle::Instance& d) {
  srcox::DesignMatrix m;
  m.columns = d.w;
  for (Eigen::Index k = 0; k < d.w.cols(); ++k)
    m.labels.push_back({static_cast<std::size_t>(k), -1});
  return m;
}

inline srcox::SurvivalDataset make_dataset(const std::vector<double>& time,
                                           const std::vector<bool>& event,
                                           const std::vector<std::vector<double>>& covariates,
                                           std::size_t d_z, std::size_t d_x) {
  std::vector<srcox::Subject> subjects;
  for (std::size_t i = 0; i < time.size(); ++i)
    subjects.push_back({time[i], event[i], covariates[i]});
  return srcox::SurvivalDataset(std::move(subjects), d_z, d_x);
}

inline std::vector<std::size_t> all_columns(std::size_t p) {
  std::vector<std::size_t> out(p);
  for (std::size_t k = 0; k < p; ++k) out[k] = k;
  return out;
}

}  // namespace testing_support
