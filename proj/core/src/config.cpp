#include "hdclass/config.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <cstdlib>
#include <istream>

#include "hdclass/errors.hpp"
#include "hdclass/losses.hpp"

namespace hdclass {

namespace {

std::string trim(std::string_view s) {
  std::size_t a = 0;
  std::size_t b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return std::string(s.substr(a, b - a));
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  int depth = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i < s.size() && s[i] == '(') ++depth;
    if (i < s.size() && s[i] == ')') --depth;
    if (i == s.size() || (s[i] == sep && depth == 0)) {
      std::string item = trim(s.substr(start, i - start));
      if (!item.empty()) out.push_back(std::move(item));
      start = i + 1;
    }
  }
  return out;
}

// Recursive descent over + - * / ^ with parentheses, sqrt/exp/log and `p`.
class ExprParser {
 public:
  ExprParser(std::string_view text, int p) : s_(text), p_(p) {}

  double parse() {
    const double v = sum();
    skip();
    if (pos_ != s_.size()) fail("unexpected trailing input");
    return v;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw InvalidArgument("bad number '" + std::string(s_) + "': " + what);
  }
  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  bool eat(char c) {
    skip();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }
  double sum() {
    double v = product();
    for (;;) {
      if (eat('+')) {
        v += product();
      } else if (eat('-')) {
        v -= product();
      } else {
        return v;
      }
    }
  }
  double product() {
    double v = power();
    for (;;) {
      if (eat('*')) {
        v *= power();
      } else if (eat('/')) {
        v /= power();
      } else {
        return v;
      }
    }
  }
  double power() {
    const double base = unary();
    if (eat('^')) return std::pow(base, power());
    return base;
  }
  double unary() {
    if (eat('-')) return -unary();
    if (eat('+')) return unary();
    return atom();
  }
  double atom() {
    skip();
    if (eat('(')) {
      const double v = sum();
      if (!eat(')')) fail("missing ')'");
      return v;
    }
    if (pos_ < s_.size() && std::isalpha(static_cast<unsigned char>(s_[pos_]))) {
      std::size_t start = pos_;
      while (pos_ < s_.size() && std::isalnum(static_cast<unsigned char>(s_[pos_]))) ++pos_;
      const std::string_view name = s_.substr(start, pos_ - start);
      if (name == "p") {
        if (p_ <= 0) fail("'p' used before the dimension is known");
        return p_;
      }
      if (!eat('(')) fail("expected '(' after " + std::string(name));
      const double arg = sum();
      if (!eat(')')) fail("missing ')'");
      if (name == "sqrt") return std::sqrt(arg);
      if (name == "exp") return std::exp(arg);
      if (name == "log") return std::log(arg);
      fail("unknown function " + std::string(name));
    }
    const char* begin = s_.data() + pos_;
    char* end = nullptr;
    const std::string buf(begin, s_.size() - pos_);
    const double v = std::strtod(buf.c_str(), &end);
    if (end == buf.c_str()) fail("expected a number");
    pos_ += static_cast<std::size_t>(end - buf.c_str());
    return v;
  }

  std::string_view s_;
  std::size_t pos_ = 0;
  int p_;
};

std::filesystem::path resolve(const std::filesystem::path& base, std::string_view file) {
  std::filesystem::path path{std::string(file)};
  if (path.is_relative() && !base.empty()) path = base / path;
  return path;
}

std::vector<std::vector<double>> read_csv_numbers(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    std::vector<double> row;
    for (const auto& cell : split(t, ',')) row.push_back(eval_number(cell, 0));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::pair<std::string, std::string> split_pattern(std::string_view spec) {
  const auto colon = spec.find(':');
  if (colon == std::string_view::npos) return {trim(spec), ""};
  return {trim(spec.substr(0, colon)), trim(spec.substr(colon + 1))};
}

bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw InvalidArgument("expected a boolean, got '" + v + "'");
}

int parse_int(const std::string& v, const char* key) {
  const double x = eval_number(v, 0);
  if (x != std::floor(x) || std::abs(x) > 2e9)
    throw InvalidArgument(std::string(key) + " must be an integer");
  return static_cast<int>(x);
}

}  // namespace

double eval_number(std::string_view expr, int p) { return ExprParser(expr, p).parse(); }

Vector build_mean(std::string_view spec, int p, const std::filesystem::path& base_dir) {
  if (p < 1) throw InvalidArgument("mean: dimension must be positive");
  const auto [kind, arg] = split_pattern(spec);
  if (kind == "ones") return Vector::Constant(p, arg.empty() ? 1.0 : eval_number(arg, p));
  if (kind == "e1") {
    Vector mu = Vector::Zero(p);
    mu[0] = arg.empty() ? 1.0 : eval_number(arg, p);
    return mu;
  }
  if (kind == "block") {
    const auto parts = split(arg, ',');
    if (parts.size() != 2) throw InvalidArgument("mean: block needs two values, e.g. block:1,2");
    Vector mu(p);
    mu.head(p / 2).setConstant(eval_number(parts[0], p));
    mu.tail(p - p / 2).setConstant(eval_number(parts[1], p));
    return mu;
  }
  if (kind == "csv") {
    const auto rows = read_csv_numbers(resolve(base_dir, arg));
    std::vector<double> flat;
    for (const auto& r : rows) flat.insert(flat.end(), r.begin(), r.end());
    if (static_cast<int>(flat.size()) != p)
      throw InvalidArgument("mean: csv has " + std::to_string(flat.size()) + " entries, expected " +
                            std::to_string(p));
    return Eigen::Map<const Vector>(flat.data(), p);
  }
  throw InvalidArgument("unknown mean pattern '" + std::string(spec) + "'");
}

MixtureModel build_model(std::string_view mean_spec, std::string_view cov_spec, int p,
                         const std::filesystem::path& base_dir) {
  Vector mu = build_mean(mean_spec, p, base_dir);
  const auto [kind, arg] = split_pattern(cov_spec);
  if (kind == "identity") return MixtureModel::isotropic(std::move(mu), 1.0);
  if (kind == "scaled") return MixtureModel::isotropic(std::move(mu), eval_number(arg, p));
  if (kind == "toeplitz") {
    const double rho = eval_number(arg, p);
    if (!(std::abs(rho) < 1.0)) throw InvalidArgument("toeplitz: |rho| must be below 1");
    Matrix cov(p, p);
    for (int i = 0; i < p; ++i)
      for (int j = 0; j < p; ++j) cov(i, j) = std::pow(rho, std::abs(i - j));
    return MixtureModel::from_covariance(std::move(mu), cov);
  }
  if (kind == "rank1") {
    const auto parts = split(arg, ',');
    if (parts.size() != 2) throw InvalidArgument("rank1 needs base,coef");
    const double base = eval_number(parts[0], p);
    const double coef = eval_number(parts[1], p);
    Vector v = Vector::Zero(p);
    v.tail(p - p / 2).setOnes();
    Matrix cov = base * Matrix::Identity(p, p) + (coef / p) * v * v.transpose();
    return MixtureModel::from_covariance(std::move(mu), cov);
  }
  if (kind == "matrix") {
    const auto rows = read_csv_numbers(resolve(base_dir, arg));
    if (static_cast<int>(rows.size()) != p) throw InvalidArgument("matrix: expected p rows");
    Matrix cov(p, p);
    for (int i = 0; i < p; ++i) {
      if (static_cast<int>(rows[i].size()) != p) throw InvalidArgument("matrix: expected p columns");
      for (int j = 0; j < p; ++j) cov(i, j) = rows[i][j];
    }
    return MixtureModel::from_covariance(std::move(mu), cov);
  }
  if (kind == "eigen") {
    const auto rows = read_csv_numbers(resolve(base_dir, arg));
    if (static_cast<int>(rows.size()) != p) throw InvalidArgument("eigen: expected p rows");
    Matrix vecs(p, p);
    Vector vals(p);
    for (int d = 0; d < p; ++d) {
      if (static_cast<int>(rows[d].size()) != p + 1)
        throw InvalidArgument("eigen: each row needs an eigenvalue followed by p vector entries");
      if (!(rows[d][0] > 0.0)) throw InvalidArgument("eigen: eigenvalues must be positive");
      vals[d] = std::sqrt(rows[d][0]);
      for (int j = 0; j < p; ++j) vecs(j, d) = rows[d][j + 1];
    }
    return MixtureModel(std::move(mu), std::move(vecs), std::move(vals));
  }
  throw InvalidArgument("unknown covariance pattern '" + std::string(cov_spec) + "'");
}

MixtureModel build_model(const ExperimentConfig& config) {
  return build_model(config.mean, config.cov, config.p, config.base_dir);
}

ExperimentConfig parse_config(std::istream& in, const std::filesystem::path& base_dir) {
  ExperimentConfig cfg;
  cfg.base_dir = base_dir;
  std::vector<std::pair<std::string, std::string>> entries;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    const std::string t = trim(std::string_view(line).substr(0, hash));
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw InvalidArgument("config line " + std::to_string(lineno) + ": expected key = value");
    std::string value = trim(std::string_view(t).substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
      value = value.substr(1, value.size() - 2);
    entries.emplace_back(trim(std::string_view(t).substr(0, eq)), std::move(value));
  }
  // p first so that numeric expressions elsewhere may refer to it.
  for (const auto& [k, v] : entries)
    if (k == "p") cfg.p = parse_int(v, "p");
  if (cfg.p < 1) throw InvalidArgument("config: p must be given and positive");

  for (const auto& [key, value] : entries) {
    if (key == "p") continue;
    if (key == "mu" || key == "mean") {
      cfg.mean = value;
    } else if (key == "cov" || key == "covariance") {
      cfg.cov = value;
    } else if (key == "noise") {
      cfg.noise = parse_noise_law(value);
    } else if (key == "losses" || key == "loss") {
      cfg.losses = split(value, ',');
    } else if (key == "lambdas" || key == "lambda") {
      cfg.lambdas.clear();
      for (const auto& item : split(value, ',')) cfg.lambdas.push_back(eval_number(item, cfg.p));
    } else if (key == "n_values" || key == "n") {
      cfg.n_values.clear();
      for (const auto& item : split(value, ',')) {
        const double n = eval_number(item, cfg.p);
        if (n != std::floor(n) || n < 1) throw InvalidArgument("config: n values must be positive integers");
        cfg.n_values.push_back(static_cast<int>(n));
      }
    } else if (key == "reps") {
      cfg.reps = parse_int(value, "reps");
    } else if (key == "seed") {
      const double s = eval_number(value, cfg.p);
      if (!(s >= 0.0) || s != std::floor(s) || s > 9.0e15)
        throw InvalidArgument("config: seed must be a nonnegative integer");
      cfg.seed = static_cast<std::uint64_t>(s);
    } else if (key == "combine") {
      cfg.combine = parse_bool(value);
    } else if (key == "timing") {
      cfg.timing = parse_bool(value);
    } else if (key == "threads") {
      cfg.threads = parse_int(value, "threads");
    } else if (key == "csv") {
      cfg.csv = value;
    } else if (key == "svg") {
      cfg.svg = value;
    } else if (key == "summary") {
      cfg.summary = value;
    } else {
      throw InvalidArgument("config: unknown key '" + key + "'");
    }
  }

  if (cfg.losses.empty()) throw InvalidArgument("config: loss list is empty");
  if (cfg.lambdas.empty()) throw InvalidArgument("config: lambda grid is empty");
  if (cfg.n_values.empty()) throw InvalidArgument("config: n grid is empty");
  if (cfg.reps < 1) throw InvalidArgument("config: reps must be >= 1");
  if (cfg.threads < 0) throw InvalidArgument("config: threads must be >= 0");
  for (double l : cfg.lambdas)
    if (!(l >= 0.0) || !std::isfinite(l)) throw InvalidArgument("config: lambdas must be >= 0");
  for (const auto& l : cfg.losses) (void)builtin_loss(l);
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open config " + path.string());
  return parse_config(in, path.parent_path());
}

}  // namespace hdclass
