#include "statfuse/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "statfuse/numerics.hpp"

namespace statfuse::io {

namespace {

static_assert(std::endian::native == std::endian::little,
              "big-endian hosts need byte swapping in io.cpp");

void write_bytes(std::ofstream& os, const void* data, std::size_t n,
                 const std::filesystem::path& path) {
  os.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
  if (!os) throw FormatError("write failed: " + path.string());
}

struct TensorHeader {
  std::uint32_t rank = 0;
  std::vector<std::uint64_t> dims;
  std::uint8_t dtype = 0;
  std::size_t payload_offset = 0;
};

std::vector<char> read_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open " + path.string());
  is.seekg(0, std::ios::end);
  const auto size = is.tellg();
  is.seekg(0);
  std::vector<char> bytes(static_cast<std::size_t>(size));
  is.read(bytes.data(), size);
  if (!is) throw FormatError("read failed: " + path.string());
  return bytes;
}

TensorHeader parse_header(const std::vector<char>& bytes,
                          const std::filesystem::path& path) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kTensorMagic, 8) != 0)
    throw FormatError(path.string() + ": bad magic at offset 0");
  TensorHeader h;
  if (bytes.size() < 12)
    throw FormatError(path.string() + ": truncated at offset 8 (rank)");
  std::memcpy(&h.rank, bytes.data() + 8, 4);
  if (h.rank == 0 || h.rank > 8)
    throw FormatError(path.string() + ": unsupported rank at offset 8");
  std::size_t off = 12;
  for (std::uint32_t i = 0; i < h.rank; ++i) {
    if (bytes.size() < off + 8)
      throw FormatError(path.string() + ": truncated at offset " +
                        std::to_string(off) + " (dims)");
    std::uint64_t d = 0;
    std::memcpy(&d, bytes.data() + off, 8);
    h.dims.push_back(d);
    off += 8;
  }
  if (bytes.size() < off + 1)
    throw FormatError(path.string() + ": truncated at offset " +
                      std::to_string(off) + " (dtype)");
  h.dtype = static_cast<std::uint8_t>(bytes[off]);
  h.payload_offset = off + 1;
  return h;
}

void check_payload(const std::vector<char>& bytes, const TensorHeader& h,
                   std::size_t element_size, const std::filesystem::path& path) {
  std::uint64_t count = 1;
  for (auto d : h.dims) count *= d;
  const std::size_t expected = h.payload_offset + count * element_size;
  if (bytes.size() != expected)
    throw FormatError(path.string() + ": payload size mismatch, expected " +
                      std::to_string(expected) + " bytes, found " +
                      std::to_string(bytes.size()));
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

[[noreturn]] void parse_fail(const std::filesystem::path& path, int line,
                             const std::string& what) {
  throw ParseError(path.string() + ":" + std::to_string(line) + ": " + what);
}

}  // namespace

void write_tensor(const std::filesystem::path& path, const ScoreMap& map) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw FormatError("cannot open for writing: " + path.string());
  write_bytes(os, kTensorMagic, 8, path);
  const std::uint32_t rank = 3;
  write_bytes(os, &rank, 4, path);
  const std::uint64_t dims[3] = {static_cast<std::uint64_t>(map.classes()),
                                 static_cast<std::uint64_t>(map.height()),
                                 static_cast<std::uint64_t>(map.width())};
  write_bytes(os, dims, 24, path);
  write_bytes(os, &kDtypeFloat32, 1, path);
  const auto raw = map.raw();
  write_bytes(os, raw.data(), raw.size() * sizeof(float), path);
}

void write_tensor(const std::filesystem::path& path, const LabelMap& map) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw FormatError("cannot open for writing: " + path.string());
  write_bytes(os, kTensorMagic, 8, path);
  const std::uint32_t rank = 2;
  write_bytes(os, &rank, 4, path);
  const std::uint64_t dims[2] = {static_cast<std::uint64_t>(map.height()),
                                 static_cast<std::uint64_t>(map.width())};
  write_bytes(os, dims, 16, path);
  write_bytes(os, &kDtypeUint16, 1, path);
  const auto raw = map.raw();
  write_bytes(os, raw.data(), raw.size() * sizeof(std::uint16_t), path);
}

ScoreMap read_score_map(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  const auto h = parse_header(bytes, path);
  if (h.rank != 3)
    throw FormatError(path.string() + ": expected rank 3 score tensor, found rank " +
                      std::to_string(h.rank));
  if (h.dtype != kDtypeFloat32)
    throw FormatError(path.string() + ": expected float32 dtype for scores");
  check_payload(bytes, h, sizeof(float), path);
  const int kk = static_cast<int>(h.dims[0]);
  const int height = static_cast<int>(h.dims[1]);
  const int width = static_cast<int>(h.dims[2]);
  ScoreMap map(height, width, kk);
  std::memcpy(map.raw().data(), bytes.data() + h.payload_offset,
              map.raw().size() * sizeof(float));

  // simplex check before the clip, then clip and renormalize in place
  std::vector<double> y(kk);
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      map.scores_at(r, c, y);
      double sum = 0.0;
      for (int j = 0; j < kk; ++j) {
        if (y[j] < -1e-3)
          throw FormatError(path.string() + ": negative score at element (" +
                            std::to_string(r) + "," + std::to_string(c) + ")");
        sum += y[j];
      }
      if (std::abs(sum - 1.0) > 1e-3)
        throw FormatError(path.string() + ": scores at element (" +
                          std::to_string(r) + "," + std::to_string(c) +
                          ") sum to " + std::to_string(sum));
      clip_to_simplex(y);
      for (int j = 0; j < kk; ++j)
        map.at(j, r, c) = static_cast<float>(y[j]);
    }
  }
  return map;
}

LabelMap read_label_map(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  const auto h = parse_header(bytes, path);
  if (h.rank != 2)
    throw FormatError(path.string() + ": expected rank 2 label tensor, found rank " +
                      std::to_string(h.rank));
  if (h.dtype != kDtypeUint16)
    throw FormatError(path.string() + ": expected uint16 dtype for labels");
  check_payload(bytes, h, sizeof(std::uint16_t), path);
  LabelMap map(static_cast<int>(h.dims[0]), static_cast<int>(h.dims[1]));
  std::memcpy(map.raw().data(), bytes.data() + h.payload_offset,
              map.raw().size() * sizeof(std::uint16_t));
  return map;
}

std::variant<ScoreMap, LabelMap> read_tensor(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  const auto h = parse_header(bytes, path);
  if (h.rank == 3 && h.dtype == kDtypeFloat32) return read_score_map(path);
  if (h.rank == 2 && h.dtype == kDtypeUint16) return read_label_map(path);
  throw FormatError(path.string() + ": unrecognized rank/dtype combination");
}

Manifest read_manifest(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw FormatError("cannot open manifest " + path.string());
  Manifest m;
  bool have_gt = false;
  std::string line;
  int lineno = 0;
  const auto base = path.parent_path();
  while (std::getline(is, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto tab = t.find('\t');
    if (tab == std::string::npos)
      parse_fail(path, lineno, "expected id<TAB>directory");
    const std::string id = t.substr(0, tab);
    std::filesystem::path dir = trim(t.substr(tab + 1));
    if (dir.is_relative()) dir = base / dir;
    if (id == "gt") {
      if (have_gt) parse_fail(path, lineno, "duplicate gt line");
      m.gt_dir = dir;
      have_gt = true;
    } else {
      m.experts.push_back({id, dir});
    }
  }
  if (!have_gt) throw FormatError(path.string() + ": missing gt line");
  if (m.experts.empty())
    throw FormatError(path.string() + ": no expert lines");
  return m;
}

void write_manifest(const std::filesystem::path& path, const Manifest& m) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw FormatError("cannot open for writing: " + path.string());
  for (const auto& e : m.experts)
    os << e.id << "\t" << e.dir.string() << "\n";
  os << "gt\t" << m.gt_dir.string() << "\n";
  if (!os) throw FormatError("write failed: " + path.string());
}

std::vector<std::string> matched_basenames(const Manifest& m) {
  std::vector<std::string> names;
  if (!std::filesystem::is_directory(m.gt_dir))
    throw FormatError("gt directory missing: " + m.gt_dir.string());
  for (const auto& entry : std::filesystem::directory_iterator(m.gt_dir))
    if (entry.is_regular_file())
      names.push_back(entry.path().filename().string());
  std::sort(names.begin(), names.end());
  if (names.empty())
    throw FormatError("gt directory empty: " + m.gt_dir.string());
  for (const auto& e : m.experts)
    for (const auto& n : names)
      if (!std::filesystem::exists(e.dir / n))
        throw FormatError("expert '" + e.id + "' is missing file " + n +
                          " in " + e.dir.string());
  return names;
}

void save_model(const std::filesystem::path& path, const FusionModel& model) {
  model.validate();
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw FormatError("cannot open for writing: " + path.string());
  os << "statfuse-model v1\n";
  os << "classes " << model.class_set.count << "\n";
  os << "names";
  for (const auto& n : model.class_set.names) os << " " << n;
  os << "\n";
  os << "ignore ";
  if (model.class_set.ignore_index)
    os << *model.class_set.ignore_index;
  else
    os << "none";
  os << "\n";
  os << std::setprecision(17);
  os << "beta " << model.beta << "\n";
  os << "delta " << model.delta << "\n";
  os << "prior";
  for (double v : model.prior.log_probs) os << " " << v;
  os << "\n";
  for (const auto& e : model.experts) {
    os << "expert " << e.id << "\n";
    os << "confusion\n";
    for (int r = 0; r < model.class_set.count; ++r) {
      for (int c = 0; c < model.class_set.count; ++c)
        os << (c ? " " : "") << e.confusion.at(r, c);
      os << "\n";
    }
    if (e.dirichlet) {
      os << "dirichlet\n";
      for (int k = 0; k < model.class_set.count; ++k) {
        os << "alpha " << k;
        for (double v : e.dirichlet->alphas[k]) os << " " << v;
        os << "\n";
      }
      if (!e.dirichlet->fallback_classes.empty()) {
        os << "fallback";
        for (int k : e.dirichlet->fallback_classes) os << " " << k;
        os << "\n";
      }
    }
    os << "end\n";
  }
  if (!os) throw FormatError("write failed: " + path.string());
}

FusionModel load_model(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw FormatError("cannot open model " + path.string());
  int lineno = 0;
  std::string line;
  auto next_line = [&](const char* what) -> std::string {
    while (std::getline(is, line)) {
      ++lineno;
      const std::string t = trim(line);
      if (!t.empty()) return t;
    }
    parse_fail(path, lineno + 1, std::string("unexpected end of file, expected ") + what);
  };
  auto expect_key = [&](const std::string& t, const std::string& key) {
    if (t.rfind(key + " ", 0) != 0 && t != key)
      parse_fail(path, lineno, "expected '" + key + "' line, found '" + t + "'");
    return t.size() > key.size() ? trim(t.substr(key.size())) : std::string();
  };

  if (next_line("header") != "statfuse-model v1")
    parse_fail(path, lineno, "bad header, expected 'statfuse-model v1'");

  FusionModel model;
  {
    std::istringstream ss(expect_key(next_line("classes"), "classes"));
    if (!(ss >> model.class_set.count) || model.class_set.count < 2)
      parse_fail(path, lineno, "invalid class count");
  }
  {
    std::istringstream ss(expect_key(next_line("names"), "names"));
    std::string n;
    while (ss >> n) model.class_set.names.push_back(n);
    if (static_cast<int>(model.class_set.names.size()) != model.class_set.count)
      parse_fail(path, lineno, "expected " +
                                   std::to_string(model.class_set.count) +
                                   " class names");
  }
  {
    const std::string v = expect_key(next_line("ignore"), "ignore");
    if (v != "none") {
      int idx = -1;
      std::istringstream ss(v);
      if (!(ss >> idx)) parse_fail(path, lineno, "invalid ignore index");
      model.class_set.ignore_index = idx;
    }
  }
  {
    std::istringstream ss(expect_key(next_line("beta"), "beta"));
    if (!(ss >> model.beta)) parse_fail(path, lineno, "invalid beta");
  }
  {
    std::istringstream ss(expect_key(next_line("delta"), "delta"));
    if (!(ss >> model.delta)) parse_fail(path, lineno, "invalid delta");
  }
  {
    std::istringstream ss(expect_key(next_line("prior"), "prior"));
    double v;
    while (ss >> v) model.prior.log_probs.push_back(v);
    if (static_cast<int>(model.prior.log_probs.size()) != model.class_set.count)
      parse_fail(path, lineno, "prior needs " +
                                   std::to_string(model.class_set.count) +
                                   " log-probabilities");
  }

  const int kk = model.class_set.count;
  std::string t;
  while (std::getline(is, line)) {
    ++lineno;
    t = trim(line);
    if (t.empty()) continue;
    FusionModel::Expert expert;
    expert.id = expect_key(t, "expert");
    if (expert.id.empty()) parse_fail(path, lineno, "expert needs an id");
    expect_key(next_line("confusion"), "confusion");
    expert.confusion = ConfusionMatrix(kk);
    for (int r = 0; r < kk; ++r) {
      std::istringstream ss(next_line("confusion row"));
      for (int c = 0; c < kk; ++c) {
        long long v;
        if (!(ss >> v) || v < 0)
          parse_fail(path, lineno, "invalid confusion count");
        expert.confusion.at(r, c) = v;
      }
    }
    std::string tail = next_line("'dirichlet' or 'end'");
    if (tail == "dirichlet") {
      DirichletModel dm;
      dm.alphas.assign(kk, {});
      for (int k = 0; k < kk; ++k) {
        std::istringstream ss(expect_key(next_line("alpha"), "alpha"));
        int idx;
        if (!(ss >> idx) || idx != k)
          parse_fail(path, lineno, "alpha lines must appear in class order");
        double v;
        std::vector<double> a;
        while (ss >> v) a.push_back(v);
        if (static_cast<int>(a.size()) != kk)
          parse_fail(path, lineno, "alpha needs " + std::to_string(kk) +
                                       " values");
        dm.alphas[k] = std::move(a);
      }
      tail = next_line("'fallback' or 'end'");
      if (tail.rfind("fallback", 0) == 0) {
        std::istringstream ss(expect_key(tail, "fallback"));
        int k;
        while (ss >> k) dm.fallback_classes.push_back(k);
        tail = next_line("end");
      }
      expert.dirichlet = std::move(dm);
    }
    if (tail != "end") parse_fail(path, lineno, "expected 'end'");
    model.experts.push_back(std::move(expert));
  }
  try {
    model.validate();
  } catch (const std::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return model;
}

}  // namespace statfuse::io
