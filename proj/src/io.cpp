#include "planedepth/io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>

namespace planedepth {

namespace {

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

float load_le_float(const char* p) {
  std::uint32_t bits = 0;
  for (int b = 3; b >= 0; --b) bits = (bits << 8) | static_cast<unsigned char>(p[b]);
  return std::bit_cast<float>(bits);
}

void store_le_float(float value, char* p) {
  std::uint32_t bits = std::bit_cast<std::uint32_t>(value);
  for (int b = 0; b < 4; ++b, bits >>= 8) p[b] = static_cast<char>(bits & 0xff);
}

struct CalibEntry {
  std::vector<double> values;
  std::size_t offset;  // byte offset of the line
};

std::map<std::string, CalibEntry> parse_calib(const std::string& text, const std::string& name) {
  std::map<std::string, CalibEntry> entries;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t end = std::min(text.find('\n', pos), text.size());
    const std::string line = text.substr(pos, end - pos);
    const std::size_t colon = line.find(':');
    if (colon != std::string::npos) {
      std::string key = line.substr(0, colon);
      key.erase(0, key.find_first_not_of(" \t"));
      key.erase(key.find_last_not_of(" \t\r") + 1);
      CalibEntry entry{{}, pos};
      std::istringstream fields(line.substr(colon + 1));
      std::string token;
      bool numeric = true;
      while (fields >> token) {
        double v = 0.0;
        const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
        if (ec != std::errc() || ptr != token.data() + token.size()) {
          numeric = false;
          break;
        }
        entry.values.push_back(v);
      }
      // Non-numeric lines (timestamps, notes) are kept only as markers.
      if (!numeric) entry.values.clear();
      if (!key.empty()) entries[key] = std::move(entry);
    } else if (line.find_first_not_of(" \t\r") != std::string::npos) {
      throw Error(ErrorKind::Parse, name + ": expected 'key: values' at byte offset " + std::to_string(pos));
    }
    pos = end + 1;
  }
  return entries;
}

const CalibEntry* find_key(const std::map<std::string, CalibEntry>& entries, std::initializer_list<const char*> keys) {
  for (const char* k : keys) {
    const auto it = entries.find(k);
    if (it != entries.end()) return &it->second;
  }
  return nullptr;
}

void require_count(const CalibEntry& e, std::size_t n, const std::string& key, const std::string& name) {
  if (e.values.size() != n)
    throw Error(ErrorKind::Parse, name + ": key " + key + " needs " + std::to_string(n) + " numbers at byte offset " +
                                      std::to_string(e.offset));
}

}  // namespace

std::vector<VelodynePoint> read_velodyne(const std::filesystem::path& path) {
  const std::string bytes = slurp(path);
  constexpr std::size_t kRecord = 16;
  if (bytes.size() % kRecord != 0) {
    const std::size_t offset = bytes.size() - bytes.size() % kRecord;
    throw Error(ErrorKind::Parse, path.string() + ": truncated point record at byte offset " + std::to_string(offset));
  }
  std::vector<VelodynePoint> points(bytes.size() / kRecord);
  for (std::size_t i = 0; i < points.size(); ++i) {
    const char* rec = bytes.data() + i * kRecord;
    VelodynePoint& p = points[i];
    p.x = load_le_float(rec);
    p.y = load_le_float(rec + 4);
    p.z = load_le_float(rec + 8);
    p.reflectance = load_le_float(rec + 12);
    if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z))
      throw Error(ErrorKind::Parse, path.string() + ": non-finite coordinate at byte offset " + std::to_string(i * kRecord));
  }
  return points;
}

void write_velodyne(const std::vector<VelodynePoint>& points, const std::filesystem::path& path) {
  std::string bytes(points.size() * 16, '\0');
  for (std::size_t i = 0; i < points.size(); ++i) {
    char* rec = bytes.data() + i * 16;
    store_le_float(points[i].x, rec);
    store_le_float(points[i].y, rec + 4);
    store_le_float(points[i].z, rec + 8);
    store_le_float(points[i].reflectance, rec + 12);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out.write(bytes.data(), static_cast<std::streamsize>(bytes.size())))
    throw Error(ErrorKind::Io, "failed writing " + path.string());
}

Intrinsicsd KittiCalib::intrinsics() const {
  Intrinsicsd k{projection(0, 0), projection(0, 2), projection(1, 2)};
  k.validate();
  return k;
}

KittiCalib read_kitti_calib(const std::filesystem::path& path) {
  const std::string name = path.string();
  const auto entries = parse_calib(slurp(path), name);
  KittiCalib calib;

  const CalibEntry* p = find_key(entries, {"P2", "P_rect_02"});
  if (!p) throw Error(ErrorKind::Calib, name + ": missing projection matrix P2 / P_rect_02");
  require_count(*p, 12, "P2", name);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 4; ++c) calib.projection(r, c) = p->values[static_cast<std::size_t>(r * 4 + c)];

  Eigen::Matrix4d tr = Eigen::Matrix4d::Identity();
  if (const CalibEntry* t = find_key(entries, {"Tr", "Tr_velo_to_cam", "Tr_velo_cam"})) {
    require_count(*t, 12, "Tr", name);
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 4; ++c) tr(r, c) = t->values[static_cast<std::size_t>(r * 4 + c)];
  } else {
    const CalibEntry* rot = find_key(entries, {"R"});
    const CalibEntry* trans = find_key(entries, {"T"});
    if (!rot || !trans) throw Error(ErrorKind::Calib, name + ": missing LiDAR-to-camera transform Tr / Tr_velo_to_cam");
    require_count(*rot, 9, "R", name);
    require_count(*trans, 3, "T", name);
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) tr(r, c) = rot->values[static_cast<std::size_t>(r * 3 + c)];
      tr(r, 3) = trans->values[static_cast<std::size_t>(r)];
    }
  }
  Eigen::Matrix4d rect = Eigen::Matrix4d::Identity();
  if (const CalibEntry* r0 = find_key(entries, {"R0_rect", "R_rect_00", "R_rect"})) {
    require_count(*r0, 9, "R0_rect", name);
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) rect(r, c) = r0->values[static_cast<std::size_t>(r * 3 + c)];
  }
  calib.velo_to_cam = rect * tr;
  return calib;
}

void write_kitti_calib(const KittiCalib& calib, const std::filesystem::path& path) {
  std::ofstream out(path);
  out.precision(17);
  out << "P2:";
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 4; ++c) out << ' ' << calib.projection(r, c);
  out << "\nTr:";
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 4; ++c) out << ' ' << calib.velo_to_cam(r, c);
  out << '\n';
  if (!out) throw Error(ErrorKind::Io, "failed writing " + path.string());
}

SparseDepth project_velodyne(const std::vector<VelodynePoint>& points, const KittiCalib& calib, int width,
                             int height) {
  if (width <= 0 || height <= 0) throw Error(ErrorKind::InvalidInput, "image size must be positive");
  const Eigen::Matrix<double, 3, 4> m = calib.projection * calib.velo_to_cam;
  std::vector<double> nearest(static_cast<std::size_t>(width) * height, 0.0);
  for (const auto& pt : points) {
    const Eigen::Vector3d h = m * Eigen::Vector4d(pt.x, pt.y, pt.z, 1.0);
    const double depth = h.z();
    if (!(depth > 0.0)) continue;
    const double u = std::round(h.x() / depth), v = std::round(h.y() / depth);
    if (u < 0 || v < 0 || u >= width || v >= height) continue;
    double& slot = nearest[static_cast<std::size_t>(v) * width + static_cast<std::size_t>(u)];
    if (slot == 0.0 || depth < slot) slot = depth;
  }
  std::vector<PixelDepthd> samples;
  for (std::size_t p = 0; p < nearest.size(); ++p)
    if (nearest[p] > 0.0)
      samples.push_back({static_cast<double>(p % width), static_cast<double>(p / width), nearest[p]});
  return SparseDepth::from_samples(width, height, std::move(samples));
}

FrameBundle load_kitti_frame(const std::filesystem::path& image_path, const std::filesystem::path& velodyne_path,
                             const std::filesystem::path& calib_path) {
  FrameBundle bundle;
  bundle.image = read_rgb_png(image_path);
  const KittiCalib calib = read_kitti_calib(calib_path);
  bundle.k = calib.intrinsics();
  bundle.sparse = project_velodyne(read_velodyne(velodyne_path), calib, bundle.image.width, bundle.image.height);
  return bundle;
}

FrameBundle crop_lower_half(const FrameBundle& bundle, int crop_height) {
  const int w = bundle.image.width, h = bundle.image.height;
  if (crop_height <= 0 || crop_height > h)
    throw Error(ErrorKind::InvalidInput, "crop height must lie in [1, image height]");
  const int top = h - crop_height;
  FrameBundle out;
  out.k = bundle.k;
  out.k.cy -= top;
  out.image = RgbImage(w, crop_height);
  std::copy(bundle.image.data.begin() + static_cast<std::ptrdiff_t>(top) * w * 3, bundle.image.data.end(),
            out.image.data.begin());
  std::vector<PixelDepthd> kept;
  for (const auto& s : bundle.sparse.samples())
    if (s.v >= top) kept.push_back({s.u, s.v - top, s.depth});
  out.sparse = SparseDepth::from_samples(w, crop_height, std::move(kept));
  if (bundle.gt) {
    DenseDepth gt(w, crop_height);
    gt.depth = bundle.gt->depth.bottomRows(crop_height);
    out.gt = std::move(gt);
  }
  return out;
}

SparseDepth sparsify(const SparseDepth& sparse, int h_factor, int v_factor) {
  if (h_factor < 1 || v_factor < 1) throw Error(ErrorKind::InvalidInput, "downsampling factors must be >= 1");
  std::vector<PixelDepthd> kept;
  for (const auto& s : sparse.samples())
    if (static_cast<int>(s.u) % h_factor == 0 && static_cast<int>(s.v) % v_factor == 0) kept.push_back(s);
  return SparseDepth::from_samples(sparse.width(), sparse.height(), std::move(kept));
}

SparseDepth sparsify(const DenseDepth& dense, int h_factor, int v_factor) {
  if (h_factor < 1 || v_factor < 1) throw Error(ErrorKind::InvalidInput, "downsampling factors must be >= 1");
  std::vector<PixelDepthd> kept;
  for (int v = 0; v < dense.height(); v += v_factor)
    for (int u = 0; u < dense.width(); u += h_factor)
      if (dense.valid(u, v)) kept.push_back({static_cast<double>(u), static_cast<double>(v), dense.depth(v, u)});
  return SparseDepth::from_samples(dense.width(), dense.height(), std::move(kept));
}

void write_ply(const DenseDepth& depth, const RgbImage& image, const Intrinsicsd& k, const std::filesystem::path& path,
               const MaskGrid* road_mask, bool binary) {
  if (image.width != depth.width() || image.height != depth.height())
    throw Error(ErrorKind::InvalidInput, "depth and image sizes differ");
  if (road_mask && (road_mask->cols() != depth.width() || road_mask->rows() != depth.height()))
    throw Error(ErrorKind::InvalidInput, "road mask and depth sizes differ");
  k.validate();

  struct Vertex {
    float x, y, z;
    std::uint8_t r, g, b;
  };
  std::vector<Vertex> vertices;
  for (int v = 0; v < depth.height(); ++v)
    for (int u = 0; u < depth.width(); ++u) {
      if (!depth.valid(u, v)) continue;
      const Point3d p = backproject(PixelDepthd{double(u), double(v), depth.depth(v, u)}, k);
      const std::uint8_t* c = image.at(u, v);
      Vertex vx{static_cast<float>(p.x()), static_cast<float>(p.y()), static_cast<float>(p.z()), c[0], c[1], c[2]};
      if (road_mask && (*road_mask)(v, u)) {
        vx.r = static_cast<std::uint8_t>(c[0] / 2);
        vx.g = static_cast<std::uint8_t>(std::min(255, c[1] / 2 + 128));
        vx.b = static_cast<std::uint8_t>(c[2] / 2);
      }
      vertices.push_back(vx);
    }

  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot create " + path.string());
  out << "ply\nformat " << (binary ? "binary_little_endian" : "ascii") << " 1.0\n"
      << "element vertex " << vertices.size() << "\n"
      << "property float x\nproperty float y\nproperty float z\n"
      << "property uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n";
  if (binary) {
    char rec[15];
    for (const auto& vx : vertices) {
      store_le_float(vx.x, rec);
      store_le_float(vx.y, rec + 4);
      store_le_float(vx.z, rec + 8);
      rec[12] = static_cast<char>(vx.r);
      rec[13] = static_cast<char>(vx.g);
      rec[14] = static_cast<char>(vx.b);
      out.write(rec, sizeof rec);
    }
  } else {
    out.precision(9);
    for (const auto& vx : vertices)
      out << vx.x << ' ' << vx.y << ' ' << vx.z << ' ' << int(vx.r) << ' ' << int(vx.g) << ' ' << int(vx.b) << '\n';
  }
  if (!out) throw Error(ErrorKind::Io, "failed writing " + path.string());
}

void write_frame_dir(const FrameBundle& frame, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_rgb_png(frame.image, dir / "image.png");
  write_depth_png(frame.sparse.to_dense(), dir / "sparse.png");
  std::ofstream k(dir / "intrinsics.txt");
  k.precision(17);
  k << frame.k.f << ' ' << frame.k.cx << ' ' << frame.k.cy << '\n';
  if (!k) throw Error(ErrorKind::Io, "failed writing " + (dir / "intrinsics.txt").string());
  if (frame.gt) write_depth_png(*frame.gt, dir / "gt.png");
}

FrameBundle read_frame_dir(const std::filesystem::path& dir) {
  FrameBundle frame;
  frame.image = read_rgb_png(dir / "image.png");
  const DenseDepth sparse = read_depth_png(dir / "sparse.png");
  if (sparse.width() != frame.image.width || sparse.height() != frame.image.height)
    throw Error(ErrorKind::InvalidInput, dir.string() + ": image and sparse depth sizes differ");
  frame.sparse = sparsify(sparse, 1, 1);
  const std::string text = slurp(dir / "intrinsics.txt");
  std::istringstream in(text);
  if (!(in >> frame.k.f >> frame.k.cx >> frame.k.cy))
    throw Error(ErrorKind::Parse, (dir / "intrinsics.txt").string() + ": expected 'f cx cy' at byte offset 0");
  frame.k.validate();
  if (std::filesystem::exists(dir / "gt.png")) frame.gt = read_depth_png(dir / "gt.png");
  return frame;
}

}  // namespace planedepth
