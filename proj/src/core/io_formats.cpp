#include "core/io_formats.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "core/errors.hpp"

namespace splatprint {

namespace {

using ordered_json = nlohmann::ordered_json;

[[noreturn]] void malformed(const std::string& path, size_t offset, const std::string& what) {
  raise(ErrorCode::MalformedFile,
        path + ": " + what + " (byte offset " + std::to_string(offset) + ")");
}

// Line-oriented cursor over a whole file, tracking byte offsets for errors.
struct TextCursor {
  const std::string& text;
  const std::string& path;
  size_t pos = 0;

  bool eof() const { return pos >= text.size(); }
  size_t offset() const { return pos; }
  std::string line() {
    if (eof()) malformed(path, pos, "unexpected end of file");
    size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    std::string out = text.substr(pos, end - pos);
    pos = end + (end < text.size() ? 1 : 0);
    return out;
  }
};

double parse_double_tok(std::istringstream& in, const std::string& path, size_t offset) {
  double v;
  if (!(in >> v)) malformed(path, offset, "expected a number");
  return v;
}

}  // namespace

std::string format_double(double v, int significant) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*g", significant, v);
  return buf;
}

void write_text_atomic(const std::string& path, const std::string& content) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    require(out.good(), ErrorCode::Io, "cannot open for writing: " + tmp);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    require(out.good(), ErrorCode::Io, "write failed: " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  require(!ec, ErrorCode::Io, "rename failed: " + path);
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorCode::Io, "cannot open: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void export_ply(const ColoredPointCloud& cloud, const std::string& path) {
  std::string out;
  out += "ply\nformat ascii 1.0\ncomment splatprint-cloud v1\n";
  out += "element vertex " + std::to_string(cloud.points.size()) + "\n";
  out += "property double x\nproperty double y\nproperty double z\n";
  out += "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  out += "property double confidence\nend_header\n";
  for (size_t i = 0; i < cloud.points.size(); ++i) {
    const Vec3& p = cloud.points[i];
    const Vec3& c = cloud.colors[i];
    auto q = [](double v) {
      return std::to_string(static_cast<int>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)));
    };
    out += format_double(p.x) + " " + format_double(p.y) + " " + format_double(p.z) + " " +
           q(c.x) + " " + q(c.y) + " " + q(c.z) + " " + format_double(cloud.confidence[i]) + "\n";
  }
  write_text_atomic(path, out);
}

ColoredPointCloud import_ply(const std::string& path) {
  std::string text = read_text(path);
  TextCursor cur{text, path};
  if (cur.line() != "ply") malformed(path, 0, "missing ply magic");
  size_t off = cur.offset();
  if (cur.line() != "format ascii 1.0") malformed(path, off, "unsupported ply format");

  size_t vertex_count = 0;
  std::vector<std::string> props;
  for (;;) {
    off = cur.offset();
    std::string l = cur.line();
    if (l == "end_header") break;
    std::istringstream in(l);
    std::string kw;
    in >> kw;
    if (kw == "comment") continue;
    if (kw == "element") {
      std::string name;
      in >> name >> vertex_count;
      if (name != "vertex") malformed(path, off, "unsupported element '" + name + "'");
    } else if (kw == "property") {
      std::string type, name;
      in >> type >> name;
      props.push_back(name);
    } else {
      malformed(path, off, "unexpected header line '" + l + "'");
    }
  }
  const std::vector<std::string> expected = {"x", "y", "z", "red", "green", "blue", "confidence"};
  if (props != expected) malformed(path, off, "unexpected property layout");

  ColoredPointCloud cloud;
  cloud.points.reserve(vertex_count);
  for (size_t i = 0; i < vertex_count; ++i) {
    off = cur.offset();
    if (cur.eof()) malformed(path, off, "truncated vertex list");
    std::istringstream in(cur.line());
    Vec3 p, c;
    double r, g, b, conf;
    p.x = parse_double_tok(in, path, off);
    p.y = parse_double_tok(in, path, off);
    p.z = parse_double_tok(in, path, off);
    r = parse_double_tok(in, path, off);
    g = parse_double_tok(in, path, off);
    b = parse_double_tok(in, path, off);
    conf = parse_double_tok(in, path, off);
    c = {r / 255.0, g / 255.0, b / 255.0};
    cloud.points.push_back(p);
    cloud.colors.push_back(c);
    cloud.confidence.push_back(conf);
  }
  return cloud;
}

void write_ppm(const ImageBuffer& img, const std::string& path) {
  std::string out = "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) +
                    "\n255\n";
  out.reserve(out.size() + img.pixels.size());
  for (double v : img.pixels) {
    out.push_back(static_cast<char>(
        static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0))));
  }
  write_text_atomic(path, out);
}

ImageBuffer read_ppm(const std::string& path) {
  std::string text = read_text(path);
  TextCursor cur{text, path};
  if (cur.line() != "P6") malformed(path, 0, "not a P6 ppm");
  size_t off = cur.offset();
  std::istringstream dims(cur.line());
  int w, h;
  if (!(dims >> w >> h) || w <= 0 || h <= 0) malformed(path, off, "bad dimensions");
  off = cur.offset();
  if (cur.line() != "255") malformed(path, off, "unsupported maxval");
  size_t need = 3 * static_cast<size_t>(w) * h;
  if (text.size() - cur.offset() < need) malformed(path, cur.offset(), "truncated pixel data");
  ImageBuffer img(w, h);
  for (size_t i = 0; i < need; ++i)
    img.pixels[i] = static_cast<unsigned char>(text[cur.offset() + i]) / 255.0;
  return img;
}

void write_pgm_mask(const BitMask& mask, const std::string& path) {
  std::string out = "P5\n" + std::to_string(mask.width) + " " + std::to_string(mask.height) +
                    "\n255\n";
  for (uint8_t b : mask.bits) out.push_back(static_cast<char>(b ? 255 : 0));
  write_text_atomic(path, out);
}

BitMask read_pgm_mask(const std::string& path) {
  std::string text = read_text(path);
  TextCursor cur{text, path};
  if (cur.line() != "P5") malformed(path, 0, "not a P5 pgm");
  size_t off = cur.offset();
  std::istringstream dims(cur.line());
  int w, h;
  if (!(dims >> w >> h) || w <= 0 || h <= 0) malformed(path, off, "bad dimensions");
  off = cur.offset();
  if (cur.line() != "255") malformed(path, off, "unsupported maxval");
  size_t need = static_cast<size_t>(w) * h;
  if (text.size() - cur.offset() < need) malformed(path, cur.offset(), "truncated pixel data");
  BitMask mask(w, h);
  for (size_t i = 0; i < need; ++i) {
    unsigned char v = static_cast<unsigned char>(text[cur.offset() + i]);
    if (v != 0 && v != 255) malformed(path, cur.offset() + i, "mask value not 0 or 255");
    mask.bits[i] = v ? 1 : 0;
  }
  return mask;
}

namespace {

ordered_json sim3_to_json(const Sim3Transform& t) {
  return ordered_json{{"scale", t.scale},
                      {"quat_wxyz", {t.rotation.w, t.rotation.x, t.rotation.y, t.rotation.z}},
                      {"translation", {t.translation.x, t.translation.y, t.translation.z}}};
}

Sim3Transform sim3_from_json(const ordered_json& j) {
  auto q = j.at("quat_wxyz");
  auto t = j.at("translation");
  return Sim3Transform(j.at("scale").get<double>(),
                       Rotation::from_stored(q[0].get<double>(), q[1].get<double>(),
                                             q[2].get<double>(), q[3].get<double>()),
                       Vec3{t[0].get<double>(), t[1].get<double>(), t[2].get<double>()});
}

std::string cameras_sidecar_path(const std::string& ply_path) {
  return ply_path + ".cameras.json";
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& ply_path) {
  std::string out;
  out += "ply\nformat ascii 1.0\ncomment splatprint-gs v1\n";
  out += "element vertex " + std::to_string(ckpt.cloud.size()) + "\n";
  for (const char* p : {"x", "y", "z", "log_sx", "log_sy", "log_sz", "qw", "qx", "qy", "qz",
                        "opacity_logit", "cr", "cg", "cb"})
    out += std::string("property double ") + p + "\n";
  out += "end_header\n";
  for (const auto& g : ckpt.cloud.gaussians) {
    const char* sep = "";
    for (double v : {g.mean.x, g.mean.y, g.mean.z, g.log_scales.x, g.log_scales.y,
                     g.log_scales.z, g.rotation.w, g.rotation.x, g.rotation.y, g.rotation.z,
                     g.opacity_logit, g.color_logits.x, g.color_logits.y, g.color_logits.z}) {
      out += sep;
      out += format_double(v, 17);
      sep = " ";
    }
    out += "\n";
  }
  write_text_atomic(ply_path, out);

  ordered_json j;
  j["format"] = "splatprint-gs v1";
  j["views"] = ordered_json::array();
  for (size_t i = 0; i < ckpt.poses.size(); ++i) {
    const CameraIntrinsics& in = ckpt.intrinsics[i];
    j["views"].push_back(ordered_json{{"focal_px", in.focal_px},
                                      {"cx", in.cx},
                                      {"cy", in.cy},
                                      {"width", in.width},
                                      {"height", in.height},
                                      {"world_from_camera", sim3_to_json(ckpt.poses[i])}});
  }
  write_text_atomic(cameras_sidecar_path(ply_path), j.dump(2) + "\n");
}

Checkpoint load_checkpoint(const std::string& ply_path) {
  std::string text = read_text(ply_path);
  TextCursor cur{text, ply_path};
  if (cur.line() != "ply") malformed(ply_path, 0, "missing ply magic");
  size_t off = cur.offset();
  if (cur.line() != "format ascii 1.0") malformed(ply_path, off, "unsupported ply format");
  off = cur.offset();
  if (cur.line() != "comment splatprint-gs v1")
    malformed(ply_path, off, "not a splatprint-gs v1 checkpoint");

  size_t count = 0;
  int props = 0;
  for (;;) {
    off = cur.offset();
    std::string l = cur.line();
    if (l == "end_header") break;
    std::istringstream in(l);
    std::string kw;
    in >> kw;
    if (kw == "comment") continue;
    if (kw == "element") {
      std::string name;
      in >> name >> count;
    } else if (kw == "property") {
      ++props;
    } else {
      malformed(ply_path, off, "unexpected header line");
    }
  }
  if (props != 14) malformed(ply_path, off, "checkpoint must carry 14 properties");

  Checkpoint ckpt;
  for (size_t i = 0; i < count; ++i) {
    off = cur.offset();
    if (cur.eof()) malformed(ply_path, off, "truncated gaussian list");
    std::istringstream in(cur.line());
    double v[14];
    for (double& x : v) x = parse_double_tok(in, ply_path, off);
    Gaussian3D g;
    g.mean = {v[0], v[1], v[2]};
    g.log_scales = {v[3], v[4], v[5]};
    g.rotation = Rotation::from_stored(v[6], v[7], v[8], v[9]);
    g.opacity_logit = v[10];
    g.color_logits = {v[11], v[12], v[13]};
    ckpt.cloud.gaussians.push_back(g);
    ckpt.cloud.source_ids.push_back(static_cast<int>(i));
  }

  std::string side = read_text(cameras_sidecar_path(ply_path));
  ordered_json j = ordered_json::parse(side, nullptr, false);
  if (j.is_discarded()) malformed(cameras_sidecar_path(ply_path), 0, "invalid json");
  if (j.value("format", "") != std::string("splatprint-gs v1"))
    malformed(cameras_sidecar_path(ply_path), 0, "wrong sidecar format tag");
  for (const auto& v : j.at("views")) {
    ckpt.intrinsics.emplace_back(v.at("focal_px").get<double>(), v.at("cx").get<double>(),
                                 v.at("cy").get<double>(), v.at("width").get<int>(),
                                 v.at("height").get<int>());
    ckpt.poses.push_back(sim3_from_json(v.at("world_from_camera")));
  }
  return ckpt;
}

void write_trace_csv(const std::vector<TraceRow>& rows, const std::string& path) {
  std::string out = "iter,l1,dssim,total,psnr\n";
  for (const auto& r : rows) {
    out += std::to_string(r.iter) + "," + format_double(r.l1) + "," + format_double(r.dssim) +
           "," + format_double(r.total) + "," + format_double(r.psnr) + "\n";
  }
  write_text_atomic(path, out);
}

void export_scene(const FingerScene& scene, const std::string& ply_path,
                  const std::string& sidecar_json_path, int sample_count) {
  auto samples = scene.sample_surface(sample_count);
  std::string out;
  out += "ply\nformat ascii 1.0\ncomment splatprint-scene v1\n";
  out += "element vertex " + std::to_string(samples.size()) + "\n";
  out += "property double x\nproperty double y\nproperty double z\n";
  out += "property double nx\nproperty double ny\nproperty double nz\n";
  out += "property uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n";
  for (const auto& s : samples) {
    auto q = [](double v) {
      return std::to_string(static_cast<int>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)));
    };
    out += format_double(s.position.x) + " " + format_double(s.position.y) + " " +
           format_double(s.position.z) + " " + format_double(s.normal.x) + " " +
           format_double(s.normal.y) + " " + format_double(s.normal.z) + " " + q(s.color.x) +
           " " + q(s.color.y) + " " + q(s.color.z) + "\n";
  }
  write_text_atomic(ply_path, out);

  ordered_json j;
  j["format"] = "splatprint-scene v1";
  j["seed"] = scene.config().seed;
  j["surface"] = ordered_json{{"radius_mm", scene.config().surface.radius_mm},
                              {"length_mm", scene.config().surface.length_mm},
                              {"cap_mm", scene.config().surface.cap_mm}};
  j["minutiae"] = ordered_json::array();
  for (const auto& m : scene.minutiae()) {
    j["minutiae"].push_back(ordered_json{
        {"id", m.id},
        {"position", {m.position.x, m.position.y, m.position.z}},
        {"type", m.type == Minutia3D::Type::Ending ? "ending" : "bifurcation"}});
  }
  j["rig"] = ordered_json::array();
  for (int v = 0; v < scene.view_count(); ++v) {
    const CameraView& view = scene.view(v);
    j["rig"].push_back(ordered_json{{"focal_px", view.intrinsics.focal_px},
                                    {"cx", view.intrinsics.cx},
                                    {"cy", view.intrinsics.cy},
                                    {"width", view.intrinsics.width},
                                    {"height", view.intrinsics.height},
                                    {"world_from_camera", sim3_to_json(view.world_from_camera)}});
  }
  write_text_atomic(sidecar_json_path, j.dump(2) + "\n");
}

}  // namespace splatprint
