#include "disvae/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include "disvae/rng.hpp"

namespace disvae {

void Dataset::validate() const {
  if (labels.empty()) throw std::invalid_argument("dataset is empty");
  if (x.rank() != 2 || x.rows() != labels.size()) throw std::invalid_argument("dataset features and labels differ in length");
  if (!x.all_finite()) throw std::invalid_argument("dataset contains non-finite values");
  for (int y : labels) {
    if (y != kUnlabeled && (y < 0 || static_cast<std::size_t>(y) >= num_classes)) {
      throw std::invalid_argument("dataset label " + std::to_string(y) + " outside [0, " +
                                  std::to_string(num_classes) + ")");
    }
  }
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  Dataset out{take_rows(x, rows), {}, num_classes};
  out.labels.reserve(rows.size());
  for (auto r : rows) out.labels.push_back(labels[r]);
  return out;
}

Dataset Dataset::only_class(int c) const {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == c) rows.push_back(i);
  }
  if (rows.empty()) throw std::invalid_argument("no samples of class " + std::to_string(c));
  return subset(rows);
}

std::string to_string(ToyGeometry g) {
  return g == ToyGeometry::kRightArcs ? "right-arcs" : "moons";
}

ToyGeometry parse_toy_geometry(const std::string& s) {
  if (s == "right-arcs") return ToyGeometry::kRightArcs;
  if (s == "moons") return ToyGeometry::kAlternatingMoons;
  throw std::invalid_argument("unknown toy geometry '" + s + "' (right-arcs, moons)");
}

Dataset generate_toy_dataset(const ToyOptions& o, std::uint64_t seed) {
  if (o.n_per_class < 1) throw std::invalid_argument("n_per_class must be >= 1");
  if (o.num_classes < 1) throw std::invalid_argument("num_classes must be >= 1");
  if (!(o.angle_lo <= o.angle_hi)) throw std::invalid_argument("empty angle range");
  Rng rng(seed);
  const std::size_t n = o.n_per_class * o.num_classes;
  Dataset ds{Tensor({n, 2}), std::vector<int>(n), o.num_classes};
  std::size_t row = 0;
  for (std::size_t c = 0; c < o.num_classes; ++c) {
    const double shift = o.spacing * static_cast<double>(c);
    const bool lower = c % 2 == 1;
    for (std::size_t i = 0; i < o.n_per_class; ++i, ++row) {
      const double t = o.angle_lo == o.angle_hi ? o.angle_lo : rng.uniform(o.angle_lo, o.angle_hi);
      const double nx = rng.normal();
      const double ny = rng.normal();
      double px = 0.0, py = 0.0;
      if (o.geometry == ToyGeometry::kRightArcs) {
        px = std::sin(t);
        py = -std::cos(t);
      } else {
        px = std::cos(t);
        py = lower ? 0.5 - std::sin(t) : std::sin(t);
      }
      ds.x.at(row, 0) = px + shift + o.noise_std * nx;
      ds.x.at(row, 1) = py + o.noise_std * ny;
      ds.labels[row] = static_cast<int>(c);
    }
  }
  return ds;
}

Dataset generate_toy_dataset(std::size_t n_per_class, std::uint64_t seed) {
  ToyOptions o;
  o.n_per_class = n_per_class;
  return generate_toy_dataset(o, seed);
}

void write_file_atomic(const std::string& path, const std::string& contents) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  fs::rename(tmp, target);
}

void save_dataset(const Dataset& ds, const std::string& path) {
  ds.validate();
  std::ostringstream os;
  os << std::setprecision(17);
  for (std::size_t j = 0; j < ds.dim(); ++j) os << 'x' << j << ',';
  os << "label\n";
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (std::size_t j = 0; j < ds.dim(); ++j) os << ds.x.at(i, j) << ',';
    os << ds.labels[i] << '\n';
  }
  write_file_atomic(path, os.str());
}

namespace {

bool is_header(const std::string& line) {
  const std::string first = line.substr(0, line.find(','));
  try {
    (void)std::stod(first);
    return false;
  } catch (const std::exception&) {
    return true;
  }
}

}  // namespace

Dataset load_dataset(const std::string& path, std::size_t num_classes) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset " + path);
  std::vector<double> values;
  std::vector<int> labels;
  std::size_t dim = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line_no == 1 && is_header(line)) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    auto fail = [&](const std::string& why) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": " + why);
    };
    if (fields.size() < 2) fail("expected at least one feature and a label");
    if (dim == 0) dim = fields.size() - 1;
    if (fields.size() - 1 != dim) {
      fail("expected " + std::to_string(dim) + " features, found " + std::to_string(fields.size() - 1));
    }
    for (std::size_t j = 0; j < dim; ++j) {
      std::size_t pos = 0;
      double v = 0.0;
      try {
        v = std::stod(fields[j], &pos);
      } catch (const std::exception&) {
        fail("malformed number '" + fields[j] + "'");
      }
      if (fields[j].find_first_not_of(" \t", pos) != std::string::npos) fail("malformed number '" + fields[j] + "'");
      if (!std::isfinite(v)) fail("non-finite value");
      values.push_back(v);
    }
    std::size_t pos = 0;
    long label = 0;
    try {
      label = std::stol(fields.back(), &pos);
    } catch (const std::exception&) {
      fail("malformed label '" + fields.back() + "'");
    }
    if (fields.back().find_first_not_of(" \t", pos) != std::string::npos) fail("malformed label '" + fields.back() + "'");
    if (label < kUnlabeled || (num_classes > 0 && label >= static_cast<long>(num_classes))) {
      fail("label " + std::to_string(label) + " outside the valid range");
    }
    labels.push_back(static_cast<int>(label));
  }
  if (labels.empty()) throw std::runtime_error(path + ": no data rows");
  if (num_classes == 0) {
    const int max_label = *std::max_element(labels.begin(), labels.end());
    num_classes = max_label < 0 ? 0 : static_cast<std::size_t>(max_label) + 1;
  }
  Dataset ds{Tensor({labels.size(), dim}, std::move(values)), std::move(labels), num_classes};
  ds.validate();
  return ds;
}

std::vector<std::vector<std::size_t>> batch_iter(std::size_t n, std::size_t batch_size, std::uint64_t seed,
                                                 std::uint64_t epoch) {
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 engine(derive_seed(seed, epoch));
  std::shuffle(order.begin(), order.end(), engine);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t end = std::min(n, start + batch_size);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

}  // namespace disvae
