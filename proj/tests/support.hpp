#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "cbindex/random.hpp"
#include "cbindex/trial_data.hpp"

namespace testing_support {

inline std::vector<double> random_benefits(cbindex::Rng& rng, std::size_t n, bool non_negative = false) {
  std::normal_distribution<double> normal(0.2, 1.0);
  std::exponential_distribution<double> expo(2.0);
  std::vector<double> b(n);
  const bool heavy = cbindex::uniform01(rng) < 0.3;
  for (auto& v : b) {
    double x = heavy ? expo(rng) - 0.3 : normal(rng);
    // Occasional exact ties exercise the ordering rule.
    if (cbindex::uniform01(rng) < 0.05) x = 0.5;
    v = non_negative ? std::fabs(x) : x;
  }
  return b;
}

inline Eigen::VectorXd to_eigen(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

/// Trial with m covariates (alternating normal / Bernoulli(0.4)), 1:1 arms,
/// NB counts from `coef` in the design layout [b0, ba, main..., inter...]
/// applied to the raw covariates.
inline cbindex::TrialDataset simulate_nb_trial(Eigen::Index n, const Eigen::VectorXd& coef, double theta,
                                               std::uint64_t seed, bool variable_time = false) {
  const Eigen::Index m = (coef.size() - 2) / 2;
  cbindex::Rng rng = cbindex::stream_rng(seed, {0x7E57ull});
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd x(n, m);
  Eigen::VectorXi a(n);
  Eigen::VectorXd y(n), t(n);
  std::vector<std::string> ids;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      x(i, j) = j % 2 == 0 ? normal(rng) : (cbindex::uniform01(rng) < 0.4 ? 1.0 : 0.0);
    }
    a(i) = i % 2 == 0 ? 0 : 1;
    t(i) = variable_time ? 0.5 + 0.5 * cbindex::uniform01(rng) : 1.0;
    double eta = coef(0) + coef(1) * a(i);
    for (Eigen::Index j = 0; j < m; ++j) eta += (coef(2 + j) + a(i) * coef(2 + m + j)) * x(i, j);
    double mu = std::exp(eta) * t(i);
    if (theta < 1e7) {
      std::gamma_distribution<double> frailty(theta, 1.0 / theta);
      mu *= frailty(rng);
    }
    std::poisson_distribution<long long> pois(mu);
    y(i) = static_cast<double>(pois(rng));
    ids.push_back("s" + std::to_string(i));
  }
  std::vector<std::string> names;
  for (Eigen::Index j = 0; j < m; ++j) names.push_back("x" + std::to_string(j + 1));
  return cbindex::TrialDataset(std::move(ids), std::move(a), std::move(y), std::move(t), std::move(x), names);
}

inline std::string to_csv(const cbindex::TrialDataset& d) {
  std::string out = "id,treatment,events,time";
  for (const auto& n : d.covariate_names()) out += "," + n;
  out += "\n";
  char buf[64];
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    out += d.ids()[static_cast<std::size_t>(i)] + "," + std::to_string(d.treatment()(i)) + ",";
    std::snprintf(buf, sizeof buf, "%.0f,%.17g", d.events()(i), d.time()(i));
    out += buf;
    for (Eigen::Index j = 0; j < d.covariate_count(); ++j) {
      std::snprintf(buf, sizeof buf, ",%.17g", d.covariates()(i, j));
      out += buf;
    }
    out += "\n";
  }
  return out;
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("cbindex_" + tag + "_" + std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }
  std::string write(const std::string& name, const std::string& content) const {
    std::ofstream(path_ / name, std::ios::binary) << content;
    return file(name);
  }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace testing_support
