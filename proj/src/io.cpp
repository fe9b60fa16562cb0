// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 gmatch contributors

#include "gmatch/io.hpp"

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace gmatch {

namespace {

constexpr char kFeatMagic[9] = "GMFEAT01";
constexpr char kParamMagic[9] = "GMPARAM1";

void put_u64(std::ostream& os, std::uint64_t v) {
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(buf), 8);
}

std::uint64_t get_u64(std::istream& is) {
  unsigned char buf[8];
  is.read(reinterpret_cast<char*>(buf), 8);
  if (!is) throw FormatError("truncated header");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return v;
}

void put_f32_row_major(std::ostream& os, const Mat& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      const float f = static_cast<float>(m(r, c));
      static_assert(sizeof(float) == 4);
      char buf[4];
      std::memcpy(buf, &f, 4);
      os.write(buf, 4);
    }
}

Mat get_f32_row_major(std::istream& is, std::uint64_t rows, std::uint64_t cols) {
  Mat m(rows, cols);
  for (std::uint64_t r = 0; r < rows; ++r)
    for (std::uint64_t c = 0; c < cols; ++c) {
      char buf[4];
      is.read(buf, 4);
      if (!is) throw FormatError("truncated payload");
      float f;
      std::memcpy(&f, buf, 4);
      m(r, c) = static_cast<double>(f);
    }
  return m;
}

std::string fmt_fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

}  // namespace

MotRecord MotRecord::from_center(int frame, int id, const BBox& b, double conf) {
  MotRecord r;
  r.frame = frame;
  r.id = id;
  r.bb_left = b.left();
  r.bb_top = b.top();
  r.bb_width = b.w;
  r.bb_height = b.h;
  r.conf = conf;
  return r;
}

std::vector<MotRecord> read_mot(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("read_mot: cannot open " + path);
  std::vector<MotRecord> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    std::vector<double> vals;
    while (std::getline(ss, field, ',')) {
      try {
        vals.push_back(std::stod(field));
      } catch (...) {
        throw ParseError("read_mot: malformed value at line " + std::to_string(lineno));
      }
    }
    if (vals.size() != 10)
      throw ParseError("read_mot: expected 10 fields at line " + std::to_string(lineno));
    MotRecord r;
    r.frame = static_cast<int>(vals[0]);
    r.id = static_cast<int>(vals[1]);
    r.bb_left = vals[2];
    r.bb_top = vals[3];
    r.bb_width = vals[4];
    r.bb_height = vals[5];
    r.conf = vals[6];
    r.x = vals[7];
    r.y = vals[8];
    r.z = vals[9];
    if (r.frame < 1 || r.bb_width <= 0.0 || r.bb_height <= 0.0)
      throw ParseError("read_mot: invalid record at line " + std::to_string(lineno));
    out.push_back(r);
  }
  return out;
}

void write_mot(const std::string& path, const std::vector<MotRecord>& records) {
  std::ofstream out(path);
  if (!out) throw ParseError("write_mot: cannot open " + path);
  for (const MotRecord& r : records) {
    out << r.frame << ',' << r.id << ',' << fmt_fixed6(r.bb_left) << ','
        << fmt_fixed6(r.bb_top) << ',' << fmt_fixed6(r.bb_width) << ','
        << fmt_fixed6(r.bb_height) << ',' << fmt_fixed6(r.conf) << ','
        << fmt_fixed6(r.x) << ',' << fmt_fixed6(r.y) << ',' << fmt_fixed6(r.z) << '\n';
  }
}

Mat read_features(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("read_features: cannot open " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kFeatMagic, 8) != 0)
    throw FormatError("read_features: bad magic");
  const std::uint64_t rows = get_u64(in);
  const std::uint64_t cols = get_u64(in);
  Mat m = get_f32_row_major(in, rows, cols);
  return m;
}

void write_features(const std::string& path, const Mat& features) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("write_features: cannot open " + path);
  out.write(kFeatMagic, 8);
  put_u64(out, static_cast<std::uint64_t>(features.rows()));
  put_u64(out, static_cast<std::uint64_t>(features.cols()));
  put_f32_row_major(out, features);
}

GcnParams read_params(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("read_params: cannot open " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kParamMagic, 8) != 0)
    throw FormatError("read_params: bad magic");
  const auto d_in = static_cast<int>(get_u64(in));
  const auto d = static_cast<int>(get_u64(in));
  const auto layers = static_cast<int>(get_u64(in));

  GcnParams p;
  p.d_in = d_in;
  p.d = d;
  auto read_mlp = [&](int in_dim, int out_dim) {
    MlpParams m;
    m.W1 = get_f32_row_major(in, out_dim, in_dim);
    m.b1 = get_f32_row_major(in, out_dim, 1).col(0);
    m.W2 = get_f32_row_major(in, out_dim, out_dim);
    m.b2 = get_f32_row_major(in, out_dim, 1).col(0);
    return m;
  };
  p.enc = read_mlp(d_in, d);
  for (int l = 0; l < layers; ++l) p.layers.push_back(read_mlp(d, d));
  return p;
}

void write_params(const std::string& path, const GcnParams& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("write_params: cannot open " + path);
  out.write(kParamMagic, 8);
  put_u64(out, static_cast<std::uint64_t>(params.d_in));
  put_u64(out, static_cast<std::uint64_t>(params.d));
  put_u64(out, static_cast<std::uint64_t>(params.layers.size()));
  auto write_mlp = [&](const MlpParams& m) {
    put_f32_row_major(out, m.W1);
    put_f32_row_major(out, m.b1);
    put_f32_row_major(out, m.W2);
    put_f32_row_major(out, m.b2);
  };
  write_mlp(params.enc);
  for (const auto& l : params.layers) write_mlp(l);
}

std::vector<std::pair<std::string, std::string>> read_kv_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("read_kv_config: cannot open " + path);
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  auto trim = [](std::string s) {
    const auto a = s.find_first_not_of(" \t\r");
    const auto b = s.find_last_not_of(" \t\r");
    return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
  };
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    if (!key.empty()) out.emplace_back(key, val);
  }
  return out;
}

}  // namespace gmatch
