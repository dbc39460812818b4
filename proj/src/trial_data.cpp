#include "cbindex/trial_data.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <unordered_map>

#include "cbindex/errors.hpp"

namespace cbindex {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        field.push_back('"');
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else {
      field.push_back(c);
    }
  }
  fields.push_back(std::move(field));
  return fields;
}

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

bool is_missing(const std::string& s) { return s.empty() || s == "NA" || s == "NaN" || s == "."; }

double parse_real(const std::string& text, std::size_t row, const std::string& column) {
  double value = 0.0;
  const char* begin = text.data();
  const char* end = begin + text.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) throw RowParseError(row, column, "not a number: '" + text + "'");
  if (!std::isfinite(value)) throw RowParseError(row, column, "non-finite value");
  return value;
}

double sample_sd(const Eigen::Ref<const Eigen::VectorXd>& x) {
  if (x.size() < 2) return 0.0;
  const double mean = x.mean();
  return std::sqrt((x.array() - mean).square().sum() / static_cast<double>(x.size() - 1));
}

}  // namespace

TrialDataset::TrialDataset(std::vector<std::string> ids, Eigen::VectorXi treatment,
                           Eigen::VectorXd events, Eigen::VectorXd time, Eigen::MatrixXd covariates,
                           std::vector<std::string> covariate_names)
    : ids_(std::move(ids)),
      treatment_(std::move(treatment)),
      events_(std::move(events)),
      time_(std::move(time)),
      covariates_(std::move(covariates)),
      covariate_names_(std::move(covariate_names)) {
  if (ids_.empty()) {
    for (Eigen::Index i = 0; i < treatment_.size(); ++i) ids_.push_back(std::to_string(i + 1));
  }
  validate();
}

TrialDataset TrialDataset::from_records(const std::vector<SubjectRecord>& records,
                                        std::vector<std::string> covariate_names) {
  const auto n = static_cast<Eigen::Index>(records.size());
  const auto m = static_cast<Eigen::Index>(covariate_names.size());
  std::vector<std::string> ids;
  ids.reserve(records.size());
  Eigen::VectorXi a(n);
  Eigen::VectorXd y(n), t(n);
  Eigen::MatrixXd x(n, m);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = records[static_cast<std::size_t>(i)];
    if (r.covariates.size() != m) {
      throw DimensionError("subject '" + r.id + "' has " + std::to_string(r.covariates.size()) +
                           " covariates, expected " + std::to_string(m));
    }
    ids.push_back(r.id);
    a(i) = r.treatment;
    y(i) = r.events;
    t(i) = r.time;
    x.row(i) = r.covariates.transpose();
  }
  return TrialDataset(std::move(ids), std::move(a), std::move(y), std::move(t), std::move(x),
                      std::move(covariate_names));
}

void TrialDataset::validate() const {
  const Eigen::Index n = treatment_.size();
  if (events_.size() != n || time_.size() != n || covariates_.rows() != n ||
      static_cast<Eigen::Index>(ids_.size()) != n) {
    throw DimensionError("trial dataset columns have inconsistent lengths");
  }
  if (static_cast<Eigen::Index>(covariate_names_.size()) != covariates_.cols()) {
    throw DimensionError("covariate name count does not match covariate columns");
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto row = static_cast<std::size_t>(i + 1);
    if (treatment_(i) != 0 && treatment_(i) != 1) throw RowParseError(row, "treatment", "must be 0 or 1");
    if (!(events_(i) >= 0.0) || events_(i) != std::floor(events_(i))) {
      throw RowParseError(row, "events", "must be a non-negative integer");
    }
    if (!(time_(i) > 0.0) || !std::isfinite(time_(i))) throw RowParseError(row, "time", "must be positive");
  }
  if (!covariates_.allFinite()) throw DimensionError("covariates must be finite");
}

SubjectRecord TrialDataset::subject(Eigen::Index i) const {
  return SubjectRecord{ids_[static_cast<std::size_t>(i)], treatment_(i), events_(i), time_(i),
                       covariates_.row(i).transpose()};
}

Eigen::Index TrialDataset::arm_size(int arm) const { return (treatment_.array() == arm).count(); }

void TrialDataset::require_both_arms() const {
  for (int arm : {0, 1}) {
    if (arm_size(arm) == 0) {
      throw EstimatorUndefinedError("estimator undefined: treatment arm " + std::to_string(arm) +
                                    " has no subjects");
    }
  }
}

TrialDataset TrialDataset::select(const std::vector<Eigen::Index>& rows) const {
  TrialDataset out;
  out.ids_.reserve(rows.size());
  for (auto r : rows) out.ids_.push_back(ids_[static_cast<std::size_t>(r)]);
  out.treatment_ = treatment_(rows);
  out.events_ = events_(rows);
  out.time_ = time_(rows);
  out.covariates_ = covariates_(rows, Eigen::all);
  out.covariate_names_ = covariate_names_;
  return out;
}

TrialDataset TrialDataset::with_covariates(Eigen::MatrixXd covariates) const {
  return TrialDataset(ids_, treatment_, events_, time_, std::move(covariates), covariate_names_);
}

TrialDataset TrialDataset::with_treatment(Eigen::VectorXi treatment) const {
  return TrialDataset(ids_, std::move(treatment), events_, time_, covariates_, covariate_names_);
}

Eigen::MatrixXd ScalingParams::apply(const Eigen::MatrixXd& raw) const {
  if (raw.cols() != means.size()) {
    throw DimensionError("expected " + std::to_string(means.size()) + " covariates, got " +
                         std::to_string(raw.cols()));
  }
  return ((raw.rowwise() - means.transpose()).array().rowwise() / sds.transpose().array()).matrix();
}

LoadResult load_dataset(std::istream& source, const ColumnSchema& schema) {
  std::string line;
  if (!std::getline(source, line)) throw SchemaError("input is empty: missing header row");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);

  std::unordered_map<std::string, std::size_t> header;
  {
    auto names = split_csv_line(line);
    for (std::size_t j = 0; j < names.size(); ++j) header.emplace(trim(names[j]), j);
  }
  auto column_index = [&](const std::string& name, const char* role) {
    auto it = header.find(name);
    if (it == header.end()) {
      throw SchemaError(std::string("missing ") + role + " column '" + name + "'");
    }
    return it->second;
  };
  if (schema.covariates.empty()) throw SchemaError("schema must name at least one covariate column");

  const std::optional<std::size_t> id_col =
      schema.id.empty() ? std::nullopt : std::optional<std::size_t>(column_index(schema.id, "id"));
  const std::size_t a_col = column_index(schema.treatment, "treatment");
  const std::size_t y_col = column_index(schema.events, "events");
  const std::size_t t_col = column_index(schema.time, "time");
  std::vector<std::size_t> x_cols;
  for (const auto& c : schema.covariates) x_cols.push_back(column_index(c, "covariate"));

  std::vector<std::string> ids;
  std::vector<int> arms;
  std::vector<double> events, times, covs;
  std::size_t dropped = 0;
  std::size_t row = 0;

  while (std::getline(source, line)) {
    if (trim(line).empty()) continue;
    ++row;
    auto fields = split_csv_line(line);
    for (auto& f : fields) f = trim(std::move(f));

    auto field = [&](std::size_t col, const std::string& name) -> const std::string& {
      if (col >= fields.size()) throw RowParseError(row, name, "row has too few fields");
      return fields[col];
    };

    bool incomplete = is_missing(field(a_col, schema.treatment)) ||
                      is_missing(field(y_col, schema.events)) || is_missing(field(t_col, schema.time));
    for (std::size_t j = 0; j < x_cols.size(); ++j) {
      incomplete = incomplete || is_missing(field(x_cols[j], schema.covariates[j]));
    }
    if (incomplete) {
      ++dropped;
      continue;
    }

    const double a = parse_real(fields[a_col], row, schema.treatment);
    if (a != 0.0 && a != 1.0) throw RowParseError(row, schema.treatment, "treatment must be 0 or 1");
    const double y = parse_real(fields[y_col], row, schema.events);
    if (y < 0.0 || y != std::floor(y)) {
      throw RowParseError(row, schema.events, "event count must be a non-negative integer");
    }
    const double t = parse_real(fields[t_col], row, schema.time);
    if (!(t > 0.0)) throw RowParseError(row, schema.time, "follow-up time must be positive");

    ids.push_back(id_col ? fields[*id_col] : std::to_string(row));
    arms.push_back(static_cast<int>(a));
    events.push_back(y);
    times.push_back(t);
    for (std::size_t j = 0; j < x_cols.size(); ++j) {
      covs.push_back(parse_real(fields[x_cols[j]], row, schema.covariates[j]));
    }
  }

  const auto n = static_cast<Eigen::Index>(arms.size());
  const auto m = static_cast<Eigen::Index>(x_cols.size());
  Eigen::VectorXi a(n);
  for (Eigen::Index i = 0; i < n; ++i) a(i) = arms[static_cast<std::size_t>(i)];
  Eigen::MatrixXd x = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      covs.data(), n, m);
  return LoadResult{TrialDataset(std::move(ids), std::move(a), Eigen::Map<Eigen::VectorXd>(events.data(), n),
                                 Eigen::Map<Eigen::VectorXd>(times.data(), n), std::move(x),
                                 schema.covariates),
                    dropped};
}

std::vector<std::string> read_csv_header(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open input file '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw SchemaError("input is empty: missing header row");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  auto names = split_csv_line(line);
  for (auto& n : names) n = trim(std::move(n));
  return names;
}

LoadResult load_dataset_file(const std::string& path, const ColumnSchema& schema) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open input file '" + path + "'");
  return load_dataset(in, schema);
}

std::pair<TrialDataset, ScalingParams> standardize(const TrialDataset& d) {
  const Eigen::MatrixXd& x = d.covariates();
  ScalingParams scaling{Eigen::VectorXd(x.cols()), Eigen::VectorXd(x.cols())};
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    scaling.means(j) = x.col(j).mean();
    scaling.sds(j) = sample_sd(x.col(j));
    if (!(scaling.sds(j) > 0.0)) throw DegenerateCovariateError(d.covariate_names()[static_cast<std::size_t>(j)]);
  }
  Eigen::MatrixXd z = scaling.apply(x);
  return {d.with_covariates(std::move(z)), std::move(scaling)};
}

std::vector<CovariateBalance> balance_check(const TrialDataset& d, double threshold) {
  d.require_both_arms();
  std::vector<Eigen::Index> arm0, arm1;
  for (Eigen::Index i = 0; i < d.size(); ++i) (d.treatment()(i) == 0 ? arm0 : arm1).push_back(i);

  std::vector<CovariateBalance> out;
  for (Eigen::Index j = 0; j < d.covariate_count(); ++j) {
    const Eigen::VectorXd col = d.covariates().col(j);
    const Eigen::VectorXd x0 = col(arm0);
    const Eigen::VectorXd x1 = col(arm1);
    const double s0 = sample_sd(x0);
    const double s1 = sample_sd(x1);
    double pooled = std::sqrt((s0 * s0 + s1 * s1) / 2.0);
    // Perfectly separated arms have no within-arm spread; fall back to the whole-sample SD.
    if (!(pooled > 0.0)) pooled = sample_sd(col);

    CovariateBalance b{d.covariate_names()[static_cast<std::size_t>(j)], std::nullopt, false};
    if (pooled > 0.0) {
      b.smd = std::abs(x1.mean() - x0.mean()) / pooled;
      b.flagged = *b.smd > threshold;
    }
    out.push_back(std::move(b));
  }
  return out;
}

}  // namespace cbindex
