// Copyright 2026 The Fusebox Authors
// SPDX-License-Identifier: Apache-2.0

#include "fusebox/frame_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "fusebox/errors.hpp"

namespace fusebox::io {

namespace {

using nlohmann::json;

[[noreturn]] void parse_fail(const std::filesystem::path& path,
                             std::uint64_t offset, const std::string& what) {
  std::ostringstream os;
  os << path.string() << ": parse error at byte " << offset << ": " << what;
  throw IoError(os.str());
}

std::ifstream open_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string() + ": cannot open file");
  return in;
}

std::ofstream create_binary(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path.string() + ": cannot create file");
  return out;
}

std::uint32_t read_u32_le(const unsigned char* b) {
  return static_cast<std::uint32_t>(b[0]) |
         (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

float f32_from_le(const unsigned char* b) {
  return std::bit_cast<float>(read_u32_le(b));
}

void f32_to_le(float v, unsigned char* b) {
  const std::uint32_t u = std::bit_cast<std::uint32_t>(v);
  b[0] = static_cast<unsigned char>(u & 0xff);
  b[1] = static_cast<unsigned char>((u >> 8) & 0xff);
  b[2] = static_cast<unsigned char>((u >> 16) & 0xff);
  b[3] = static_cast<unsigned char>((u >> 24) & 0xff);
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

// PNM-style header token: skips whitespace and '#' comments.
std::string next_pnm_token(std::istream& in) {
  std::string tok;
  int c = in.get();
  while (c != EOF) {
    if (c == '#') {
      while (c != EOF && c != '\n') c = in.get();
    } else if (std::isspace(c)) {
      c = in.get();
    } else {
      break;
    }
  }
  while (c != EOF && !std::isspace(c)) {
    tok.push_back(static_cast<char>(c));
    c = in.get();
  }
  return tok;
}

long parse_pnm_int(std::istream& in, const std::filesystem::path& path,
                   const char* what) {
  const auto before = in.tellg();
  const std::string tok = next_pnm_token(in);
  try {
    std::size_t used = 0;
    const long v = std::stol(tok, &used);
    if (used != tok.size() || v < 0) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    parse_fail(path, before < 0 ? 0 : static_cast<std::uint64_t>(before),
               std::string("invalid ") + what);
  }
}

}  // namespace

std::vector<RawPoint> load_point_cloud(const std::filesystem::path& path) {
  auto in = open_binary(path);
  unsigned char magic[4];
  if (!in.read(reinterpret_cast<char*>(magic), 4))
    parse_fail(path, 0, "missing PCBF magic");
  if (std::memcmp(magic, "PCBF", 4) != 0)
    parse_fail(path, 0, "bad magic, expected \"PCBF\"");
  unsigned char countb[4];
  if (!in.read(reinterpret_cast<char*>(countb), 4))
    parse_fail(path, 4, "missing record count");
  const std::uint32_t count = read_u32_le(countb);

  std::vector<RawPoint> points;
  points.reserve(count);
  std::vector<unsigned char> buf(16);
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint64_t offset = 8 + static_cast<std::uint64_t>(i) * 16;
    if (!in.read(reinterpret_cast<char*>(buf.data()), 16)) {
      std::ostringstream os;
      os << "truncated payload, record " << i << " of " << count;
      parse_fail(path, offset, os.str());
    }
    points.push_back(RawPoint{f32_from_le(buf.data()), f32_from_le(buf.data() + 4),
                              f32_from_le(buf.data() + 8),
                              f32_from_le(buf.data() + 12)});
  }
  if (in.get() != EOF) {
    parse_fail(path, 8 + static_cast<std::uint64_t>(count) * 16,
               "trailing bytes after declared record count");
  }
  return points;
}

void write_point_cloud(const std::filesystem::path& path,
                       std::span<const RawPoint> points) {
  auto out = create_binary(path);
  out.write("PCBF", 4);
  const std::uint32_t count = static_cast<std::uint32_t>(points.size());
  unsigned char b[16];
  b[0] = static_cast<unsigned char>(count & 0xff);
  b[1] = static_cast<unsigned char>((count >> 8) & 0xff);
  b[2] = static_cast<unsigned char>((count >> 16) & 0xff);
  b[3] = static_cast<unsigned char>((count >> 24) & 0xff);
  out.write(reinterpret_cast<char*>(b), 4);
  for (const RawPoint& p : points) {
    f32_to_le(p.x, b);
    f32_to_le(p.y, b + 4);
    f32_to_le(p.z, b + 8);
    f32_to_le(p.intensity, b + 12);
    out.write(reinterpret_cast<char*>(b), 16);
  }
  if (!out) throw IoError(path.string() + ": write failed");
}

InstanceMask load_mask(const std::filesystem::path& mask_path,
                       const std::filesystem::path& table_path) {
  InstanceMask mask;
  {
    auto in = open_binary(mask_path);
    const std::string magic = next_pnm_token(in);
    if (magic != "P5") parse_fail(mask_path, 0, "bad magic, expected \"P5\"");
    const long w = parse_pnm_int(in, mask_path, "width");
    const long h = parse_pnm_int(in, mask_path, "height");
    const auto maxval_pos = in.tellg();
    const long maxval = parse_pnm_int(in, mask_path, "maxval");
    if (maxval != 65535) {
      parse_fail(mask_path,
                 maxval_pos < 0 ? 0 : static_cast<std::uint64_t>(maxval_pos),
                 "maxval must be 65535 for 16-bit masks");
    }
    // header ends after exactly one whitespace byte (consumed by the token
    // reader); samples are big-endian u16
    mask.width = static_cast<int>(w);
    mask.height = static_cast<int>(h);
    const std::size_t n = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
    std::vector<unsigned char> raw(n * 2);
    const auto data_pos = in.tellg();
    if (!in.read(reinterpret_cast<char*>(raw.data()),
                 static_cast<std::streamsize>(raw.size()))) {
      parse_fail(mask_path,
                 data_pos < 0 ? 0 : static_cast<std::uint64_t>(data_pos),
                 "truncated raster payload");
    }
    mask.values.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      mask.values[i] = static_cast<std::uint16_t>(
          (static_cast<std::uint16_t>(raw[2 * i]) << 8) | raw[2 * i + 1]);
    }
  }

  {
    std::ifstream in(table_path);
    if (!in) throw IoError(table_path.string() + ": cannot open file");
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      std::istringstream ls(line);
      long id = 0;
      long class_id = 0;
      if (!(ls >> id >> class_id) || id < 0 || id > 65535) {
        std::ostringstream os;
        os << table_path.string() << ":" << line_no << ": expected \"<instance_id> <class_id>\"";
        throw IoError(os.str());
      }
      const auto key = static_cast<std::uint16_t>(id);
      if (mask.class_table.contains(key)) {
        std::ostringstream os;
        os << table_path.string() << ":" << line_no << ": duplicate instance id " << id;
        throw IoError(os.str());
      }
      mask.class_table[key] = static_cast<int>(class_id);
    }
  }

  for (std::uint16_t v : mask.values) {
    if (v != 0 && !mask.class_table.contains(v)) {
      std::ostringstream os;
      os << mask_path.string() << ": instance id " << v
         << " present in raster but missing from " << table_path.string();
      throw IoError(os.str());
    }
  }
  return mask;
}

void write_mask(const std::filesystem::path& mask_path,
                const std::filesystem::path& table_path,
                const InstanceMask& mask) {
  auto out = create_binary(mask_path);
  out << "P5\n" << mask.width << " " << mask.height << "\n65535\n";
  std::vector<unsigned char> raw(mask.values.size() * 2);
  for (std::size_t i = 0; i < mask.values.size(); ++i) {
    raw[2 * i] = static_cast<unsigned char>(mask.values[i] >> 8);
    raw[2 * i + 1] = static_cast<unsigned char>(mask.values[i] & 0xff);
  }
  out.write(reinterpret_cast<char*>(raw.data()),
            static_cast<std::streamsize>(raw.size()));
  if (!out) throw IoError(mask_path.string() + ": write failed");

  std::ofstream table(table_path, std::ios::trunc);
  if (!table) throw IoError(table_path.string() + ": cannot create file");
  for (const auto& [id, class_id] : mask.class_table)
    table << id << " " << class_id << "\n";
  if (!table) throw IoError(table_path.string() + ": write failed");
}

DepthMap load_depth(const std::filesystem::path& path) {
  auto in = open_binary(path);
  const std::string magic = next_pnm_token(in);
  if (magic != "Pf") parse_fail(path, 0, "bad magic, expected \"Pf\"");
  const long w = parse_pnm_int(in, path, "width");
  const long h = parse_pnm_int(in, path, "height");
  const auto scale_pos = in.tellg();
  const std::string scale_tok = next_pnm_token(in);
  double scale = 0.0;
  try {
    scale = std::stod(scale_tok);
  } catch (const std::exception&) {
    parse_fail(path, scale_pos < 0 ? 0 : static_cast<std::uint64_t>(scale_pos),
               "invalid scale");
  }
  const bool little_endian = scale < 0.0;

  DepthMap depth;
  depth.width = static_cast<int>(w);
  depth.height = static_cast<int>(h);
  const std::size_t n = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  std::vector<unsigned char> raw(n * 4);
  const auto data_pos = in.tellg();
  if (!in.read(reinterpret_cast<char*>(raw.data()),
               static_cast<std::streamsize>(raw.size()))) {
    parse_fail(path, data_pos < 0 ? 0 : static_cast<std::uint64_t>(data_pos),
               "truncated raster payload");
  }
  if (in.get() != EOF) {
    parse_fail(path,
               static_cast<std::uint64_t>(data_pos) + static_cast<std::uint64_t>(n) * 4,
               "trailing bytes after raster payload");
  }
  depth.values.resize(n);
  // PFM rows are bottom-up on disk
  for (long row = 0; row < h; ++row) {
    const long src_row = h - 1 - row;
    for (long col = 0; col < w; ++col) {
      const unsigned char* b = raw.data() + (static_cast<std::size_t>(src_row) * w + col) * 4;
      unsigned char le[4];
      if (little_endian) {
        le[0] = b[0]; le[1] = b[1]; le[2] = b[2]; le[3] = b[3];
      } else {
        le[0] = b[3]; le[1] = b[2]; le[2] = b[1]; le[3] = b[0];
      }
      depth.values[static_cast<std::size_t>(row) * w + col] = f32_from_le(le);
    }
  }
  return depth;
}

void write_depth(const std::filesystem::path& path, const DepthMap& depth) {
  auto out = create_binary(path);
  out << "Pf\n" << depth.width << " " << depth.height << "\n-1.0\n";
  std::vector<unsigned char> raw(depth.values.size() * 4);
  for (int row = 0; row < depth.height; ++row) {
    const int src_row = depth.height - 1 - row;  // disk order is bottom-up
    for (int col = 0; col < depth.width; ++col) {
      f32_to_le(depth.values[static_cast<std::size_t>(src_row) * depth.width + col],
                raw.data() + (static_cast<std::size_t>(row) * depth.width + col) * 4);
    }
  }
  out.write(reinterpret_cast<char*>(raw.data()),
            static_cast<std::streamsize>(raw.size()));
  if (!out) throw IoError(path.string() + ": write failed");
}

std::vector<BoxRecord> read_boxes(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path.string() + ": cannot open file");
  std::vector<BoxRecord> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::vector<std::string> fields;
    std::string tok;
    while (ls >> tok) fields.push_back(tok);
    if (fields.size() != 11) {
      std::ostringstream os;
      os << path.string() << ":" << line_no << ": expected 11 fields, got "
         << fields.size();
      throw IoError(os.str());
    }
    auto num = [&](int idx) {
      try {
        std::size_t used = 0;
        const double v = std::stod(fields[static_cast<std::size_t>(idx)], &used);
        if (used != fields[static_cast<std::size_t>(idx)].size() || !std::isfinite(v))
          throw std::invalid_argument("non-finite");
        return v;
      } catch (const std::exception&) {
        std::ostringstream os;
        os << path.string() << ":" << line_no << ": field " << idx + 1
           << " is not a finite number";
        throw IoError(os.str());
      }
    };
    BoxRecord rec;
    rec.frame_id = fields[0];
    rec.box.class_id = static_cast<int>(num(1));
    rec.box.center = {num(2), num(3), num(4)};
    rec.box.length = num(5);
    rec.box.width = num(6);
    rec.box.height = num(7);
    rec.box.yaw = num(8);
    rec.box.score = num(9);
    rec.box.instance_id = fields[10] == "-" ? std::string() : fields[10];
    out.push_back(std::move(rec));
  }
  return out;
}

void write_boxes(const std::filesystem::path& path,
                 std::span<const BoxRecord> boxes) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError(path.string() + ": cannot create file");
  for (const BoxRecord& rec : boxes) {
    const geom::Box3D& b = rec.box;
    out << rec.frame_id << " " << b.class_id << " " << format_double(b.center.x)
        << " " << format_double(b.center.y) << " " << format_double(b.center.z)
        << " " << format_double(b.length) << " " << format_double(b.width)
        << " " << format_double(b.height) << " " << format_double(b.yaw) << " "
        << format_double(b.score) << " "
        << (b.instance_id.empty() ? "-" : b.instance_id) << "\n";
  }
  if (!out) throw IoError(path.string() + ": write failed");
}

std::vector<geom::CameraModel> load_calibration(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path.string() + ": cannot open file");
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
  if (!doc.is_array())
    throw IoError(path.string() + ": expected a JSON array of cameras");

  std::vector<geom::CameraModel> cameras;
  std::set<std::string> names;
  for (const auto& entry : doc) {
    geom::CameraModel cam;
    try {
      cam.name = entry.at("name").get<std::string>();
      cam.width = entry.at("width").get<int>();
      cam.height = entry.at("height").get<int>();
      const auto k = entry.at("intrinsics");
      const auto t = entry.at("ego_from_camera");
      if (k.size() != 9 || t.size() != 16)
        throw IoError(path.string() +
                      ": intrinsics must have 9 entries and ego_from_camera 16");
      for (std::size_t i = 0; i < 9; ++i) cam.intrinsics[i] = k[i].get<double>();
      for (std::size_t i = 0; i < 16; ++i)
        cam.ego_from_camera[i] = t[i].get<double>();
    } catch (const json::exception& e) {
      throw IoError(path.string() + ": " + e.what());
    }
    cam.validate();
    if (!names.insert(cam.name).second)
      throw IoError(path.string() + ": duplicate camera name " + cam.name);
    cameras.push_back(std::move(cam));
  }
  return cameras;
}

void write_calibration(const std::filesystem::path& path,
                       std::span<const geom::CameraModel> cameras) {
  json doc = json::array();
  for (const auto& cam : cameras) {
    json entry;
    entry["name"] = cam.name;
    entry["width"] = cam.width;
    entry["height"] = cam.height;
    entry["intrinsics"] = cam.intrinsics;
    entry["ego_from_camera"] = cam.ego_from_camera;
    doc.push_back(std::move(entry));
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError(path.string() + ": cannot create file");
  out << doc.dump(2) << "\n";
  if (!out) throw IoError(path.string() + ": write failed");
}

LossTrace load_loss_trace(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path.string() + ": cannot open file");
  LossTrace trace;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line_no == 1 && line.starts_with("epoch")) continue;  // header row
    const auto comma = line.find(',');
    if (comma == std::string::npos) {
      std::ostringstream os;
      os << path.string() << ":" << line_no << ": expected \"epoch,loss\"";
      throw IoError(os.str());
    }
    try {
      LossTrace::Entry e;
      e.epoch = std::stoi(line.substr(0, comma));
      e.loss = std::stod(line.substr(comma + 1));
      if (!std::isfinite(e.loss) || e.loss < 0.0)
        throw std::invalid_argument("loss");
      if (!trace.entries.empty() && e.epoch <= trace.entries.back().epoch)
        throw std::invalid_argument("epoch order");
      trace.entries.push_back(e);
    } catch (const std::exception&) {
      std::ostringstream os;
      os << path.string() << ":" << line_no
         << ": epochs must be strictly increasing and losses finite and nonnegative";
      throw IoError(os.str());
    }
  }
  return trace;
}

void write_loss_trace(const std::filesystem::path& path,
                      const LossTrace& trace) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError(path.string() + ": cannot create file");
  out << "epoch,loss\n";
  for (const auto& e : trace.entries)
    out << e.epoch << "," << format_double(e.loss) << "\n";
  if (!out) throw IoError(path.string() + ": write failed");
}

std::vector<std::string> list_frame_ids(const std::filesystem::path& root) {
  const auto frames_dir = root / "frames";
  if (!std::filesystem::is_directory(frames_dir))
    throw IoError(frames_dir.string() + ": not a directory");
  std::vector<std::string> ids;
  for (const auto& entry : std::filesystem::directory_iterator(frames_dir)) {
    if (entry.is_directory()) ids.push_back(entry.path().filename().string());
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

Frame load_frame(const std::filesystem::path& root, const std::string& frame_id,
                 std::span<const geom::CameraModel> cameras) {
  const auto dir = root / "frames" / frame_id;
  Frame frame;
  frame.frame_id = frame_id;
  frame.points = load_point_cloud(dir / "cloud.pcbf");
  for (const auto& cam : cameras) {
    CameraView view;
    view.model = cam;
    view.mask = load_mask(dir / ("mask_" + cam.name + ".pgm"),
                          dir / ("mask_" + cam.name + ".txt"));
    view.depth = load_depth(dir / ("depth_" + cam.name + ".pfm"));
    if (view.mask.width != cam.width || view.mask.height != cam.height ||
        view.depth.width != cam.width || view.depth.height != cam.height) {
      std::ostringstream os;
      os << dir.string() << ": raster dimensions for camera " << cam.name
         << " do not match calibration (" << cam.width << "x" << cam.height
         << ")";
      throw IoError(os.str());
    }
    frame.cameras.push_back(std::move(view));
  }
  return frame;
}

}  // namespace fusebox::io
