#include "ergocov/domain.hpp"

#include "ergocov/diagnostics.hpp"
#include "ergocov/error.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <vector>

namespace ergocov {

DomainSamples::DomainSamples(Points points, std::optional<Vec> weights) : points_(std::move(points)) {
  if (points_.cols() < 2) throw DegenerateDomain("at least two target samples are required");
  if (points_.rows() < 1) throw InvalidArgument("target samples must have dimension >= 1");
  if (!points_.allFinite()) throw InvalidArgument("target samples contain NaN or Inf coordinates");

  const Eigen::Index m = points_.cols();
  if (!weights) {
    weights_ = Vec::Constant(m, 1.0 / static_cast<double>(m));
    return;
  }
  if (weights->size() != m) throw InvalidArgument("weight count does not match sample count");
  if (!weights->allFinite() || (weights->array() < 0.0).any())
    throw InvalidArgument("sample weights must be finite and nonnegative");
  const double total = weights->sum();
  if (!(total > 0.0)) throw InvalidArgument("sample weights sum to zero");
  weights_ = *weights / total;
  uniform_ = (weights->array() == (*weights)(0)).all();
  if (uniform_) weights_.setConstant(1.0 / static_cast<double>(m));
}

double compute_extent(const DomainSamples& samples) {
  const Points& p = samples.points();
  const double e = (p.rowwise().maxCoeff() - p.rowwise().minCoeff()).maxCoeff();
  if (!(e > 0.0)) throw DegenerateDomain("all target samples coincide (zero extent)");
  return e;
}

double snap_coordinate(double x) { return std::ldexp(std::nearbyint(std::ldexp(x, 34)), -34); }

double snap_relative(double x) {
  if (x == 0.0 || !std::isfinite(x)) return x;
  int e = 0;
  const double m = std::frexp(x, &e);
  return std::ldexp(std::nearbyint(std::ldexp(m, 33)), e - 33);
}

NormalizedDomain::NormalizedDomain(DomainSamples samples)
    : NormalizedDomain(samples, compute_extent(samples), samples.points().rowwise().minCoeff()) {}

NormalizedDomain::NormalizedDomain(DomainSamples samples, double extent, Vec offset)
    : source_(std::move(samples)), extent_(extent), offset_(std::move(offset)) {
  normalized_ = normalize_points(source_.points()).unaryExpr(&snap_coordinate);
}

NormalizedDomain NormalizedDomain::identity(DomainSamples samples) {
  compute_extent(samples);  // still reject degenerate domains
  const Eigen::Index d = samples.dim();
  return NormalizedDomain(std::move(samples), 1.0, Vec::Zero(d));
}

Vec NormalizedDomain::normalize(const Eigen::Ref<const Vec>& point) const {
  if (point.size() != dim()) throw InvalidArgument("point dimension does not match domain");
  return (point - offset_) / extent_;
}

Vec NormalizedDomain::denormalize(const Eigen::Ref<const Vec>& point) const {
  if (point.size() != dim()) throw InvalidArgument("point dimension does not match domain");
  return point * extent_ + offset_;
}

Points NormalizedDomain::normalize_points(const Points& points) const {
  if (points.rows() != dim()) throw InvalidArgument("point dimension does not match domain");
  return (points.colwise() - offset_) / extent_;
}

Points NormalizedDomain::denormalize_points(const Points& points) const {
  if (points.rows() != dim()) throw InvalidArgument("point dimension does not match domain");
  return (points * extent_).colwise() + offset_;
}

std::optional<SampleFormat> format_from_path(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".csv" || ext == ".txt") return SampleFormat::csv;
  if (ext == ".obj") return SampleFormat::obj;
  if (ext == ".ply") return SampleFormat::ply;
  return std::nullopt;
}

std::string to_string(SampleFormat format) {
  switch (format) {
    case SampleFormat::csv: return "csv";
    case SampleFormat::obj: return "obj";
    case SampleFormat::ply: return "ply";
  }
  return "unknown";
}

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

double parse_number(const std::string& token, const std::string& source, std::size_t line) {
  const std::string t = trim(token);
  double value = 0.0;
  const char* first = t.data();
  const char* last = t.data() + t.size();
  if (!t.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (t.empty() || ec != std::errc() || ptr != last)
    throw ParseError(source, line, "expected a number, got '" + t + "'");
  return value;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(line);
  while (std::getline(is, cur, sep)) out.push_back(cur);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream is(line);
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

DomainSamples build_samples(const std::vector<std::vector<double>>& rows, int dim,
                            const std::vector<double>* weights, const std::string& source) {
  if (rows.size() < 2)
    throw DegenerateDomain(source + ": at least two samples are required, found " + std::to_string(rows.size()));
  Points pts(dim, static_cast<Eigen::Index>(rows.size()));
  for (std::size_t j = 0; j < rows.size(); ++j)
    for (int i = 0; i < dim; ++i) pts(i, static_cast<Eigen::Index>(j)) = rows[j][i];
  if (!weights) return DomainSamples(std::move(pts));
  Vec w = Eigen::Map<const Vec>(weights->data(), static_cast<Eigen::Index>(weights->size()));
  return DomainSamples(std::move(pts), std::move(w));
}

}  // namespace

DomainSamples parse_csv_samples(const std::string& text, const std::string& source, std::optional<int> dim) {
  std::istringstream in(text);
  std::string raw;
  std::size_t line_no = 0;
  std::vector<std::vector<double>> rows;
  std::vector<double> weights;
  std::optional<int> columns;
  std::optional<bool> header_weight;
  std::optional<int> header_dim;

  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = trim(raw);
    if (line.empty()) continue;
    if (line.front() == '#') {
      // Optional header naming the columns, e.g. "# x,y,weight".
      if (rows.empty()) {
        auto names = split(trim(line.substr(1)), ',');
        int coords = 0;
        bool has_weight = false, recognized = !names.empty();
        for (auto& n : names) {
          std::string name = trim(n);
          std::transform(name.begin(), name.end(), name.begin(), [](unsigned char c) { return std::tolower(c); });
          if (name == "x" || name == "y" || name == "z") ++coords;
          else if (name == "weight" || name == "w") has_weight = true;
          else recognized = false;
        }
        if (recognized && coords >= 1) {
          header_dim = coords;
          header_weight = has_weight;
        }
      }
      continue;
    }
    auto fields = split(line, ',');
    if (columns && static_cast<int>(fields.size()) != *columns)
      throw ParseError(source, line_no, "expected " + std::to_string(*columns) + " columns, got " +
                                            std::to_string(fields.size()));
    columns = static_cast<int>(fields.size());
    std::vector<double> values;
    values.reserve(fields.size());
    for (auto& f : fields) values.push_back(parse_number(f, source, line_no));
    for (double v : values)
      if (!std::isfinite(v)) throw ParseError(source, line_no, "non-finite value");
    rows.push_back(std::move(values));
  }
  if (rows.empty()) throw DegenerateDomain(source + ": no samples found");

  const int ncol = *columns;
  int d = 0;
  bool has_weight = false;
  if (header_dim) {
    d = *header_dim;
    has_weight = *header_weight;
  } else if (dim) {
    d = *dim;
    has_weight = ncol == d + 1;
  } else {
    d = std::min(ncol, 3);
    has_weight = ncol == 4;
  }
  if (ncol != d + (has_weight ? 1 : 0) || d < 1)
    throw ParseError(source, 1, "cannot interpret " + std::to_string(ncol) + " columns as x,y[,z][,weight]");

  if (!has_weight) return build_samples(rows, d, nullptr, source);
  weights.reserve(rows.size());
  for (auto& r : rows) weights.push_back(r[d]);
  return build_samples(rows, d, &weights, source);
}

DomainSamples parse_obj_samples(const std::string& text, const std::string& source) {
  std::istringstream in(text);
  std::string raw;
  std::size_t line_no = 0;
  std::vector<std::vector<double>> rows;
  while (std::getline(in, raw)) {
    ++line_no;
    auto tok = split_ws(raw);
    if (tok.empty() || tok[0] != "v") continue;
    if (tok.size() < 4) throw ParseError(source, line_no, "vertex needs three coordinates");
    rows.push_back({parse_number(tok[1], source, line_no), parse_number(tok[2], source, line_no),
                    parse_number(tok[3], source, line_no)});
  }
  return build_samples(rows, 3, nullptr, source);
}

DomainSamples parse_ply_samples(const std::string& text, const std::string& source) {
  std::istringstream in(text);
  std::string raw;
  std::size_t line_no = 0;
  if (!std::getline(in, raw) || trim(raw) != "ply") throw ParseError(source, 1, "missing 'ply' magic");
  ++line_no;

  long vertex_count = -1;
  bool in_vertex = false;
  std::vector<std::string> vertex_props;
  bool header_done = false;
  while (std::getline(in, raw)) {
    ++line_no;
    auto tok = split_ws(raw);
    if (tok.empty()) continue;
    if (tok[0] == "format") {
      if (tok.size() < 2 || tok[1] != "ascii") throw ParseError(source, line_no, "only ASCII PLY is supported");
    } else if (tok[0] == "element") {
      if (tok.size() < 3) throw ParseError(source, line_no, "malformed element line");
      in_vertex = tok[1] == "vertex";
      if (in_vertex) vertex_count = std::stol(tok[2]);
    } else if (tok[0] == "property") {
      if (in_vertex) vertex_props.push_back(tok.back());
    } else if (tok[0] == "end_header") {
      header_done = true;
      break;
    }
  }
  if (!header_done) throw ParseError(source, line_no, "missing end_header");
  if (vertex_count < 0) throw ParseError(source, line_no, "no vertex element");

  auto index_of = [&](const std::string& name) -> long {
    auto it = std::find(vertex_props.begin(), vertex_props.end(), name);
    return it == vertex_props.end() ? -1 : static_cast<long>(it - vertex_props.begin());
  };
  const long ix = index_of("x"), iy = index_of("y"), iz = index_of("z");
  if (ix < 0 || iy < 0 || iz < 0) throw ParseError(source, line_no, "vertex element lacks x/y/z properties");

  std::vector<std::vector<double>> rows;
  rows.reserve(static_cast<std::size_t>(vertex_count));
  while (static_cast<long>(rows.size()) < vertex_count && std::getline(in, raw)) {
    ++line_no;
    auto tok = split_ws(raw);
    if (tok.empty()) continue;
    if (tok.size() < vertex_props.size())
      throw ParseError(source, line_no, "vertex row has too few values");
    rows.push_back({parse_number(tok[ix], source, line_no), parse_number(tok[iy], source, line_no),
                    parse_number(tok[iz], source, line_no)});
  }
  if (static_cast<long>(rows.size()) != vertex_count)
    throw ParseError(source, line_no, "file ended before all vertices were read");
  return build_samples(rows, 3, nullptr, source);
}

DomainSamples load_samples(const std::filesystem::path& path, SampleFormat format, std::optional<int> dim) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open domain file: " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string name = path.string();

  DomainSamples samples = [&] {
    switch (format) {
      case SampleFormat::csv: return parse_csv_samples(buf.str(), name, dim);
      case SampleFormat::obj: return parse_obj_samples(buf.str(), name);
      case SampleFormat::ply: return parse_ply_samples(buf.str(), name);
    }
    throw InvalidArgument("unknown sample format");
  }();

  std::ostringstream msg;
  msg << "loaded " << name << " format=" << to_string(format) << " M=" << samples.size() << " d=" << samples.dim()
      << " extent=" << compute_extent(samples);
  diagnose(Verbosity::info, msg.str());
  return samples;
}

DomainSamples load_samples(const std::filesystem::path& path) {
  auto format = format_from_path(path);
  if (!format) throw InvalidArgument("cannot infer sample format from extension: " + path.string());
  return load_samples(path, *format);
}

}  // namespace ergocov
