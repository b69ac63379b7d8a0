#include "roitrack/io.hpp"

#include <jpeglib.h>
#include <png.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>

#include "roitrack/error.hpp"

namespace roitrack::io {
namespace {

std::string lower_extension(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext;
}

bool is_image_file(const fs::path& p) {
  const std::string ext = lower_extension(p);
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

bool parse_double(std::string_view text, double& out) {
  text = trim(text);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc() && ptr == text.data() + text.size() && !text.empty();
}

std::string format_double(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
  return lines;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

Image read_png(const fs::path& path) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.c_str())) {
    throw FormatError("unreadable image " + path.string() + ": " + img.message);
  }
  img.format = PNG_FORMAT_RGB;
  std::vector<png_byte> buf(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr)) {
    png_image_free(&img);
    throw FormatError("unreadable image " + path.string() + ": " + img.message);
  }
  Image out(img.width, img.height);
  std::span<float> px = out.data();
  for (std::size_t i = 0; i < px.size(); ++i) px[i] = static_cast<float>(buf[i]) / 255.0f;
  return out;
}

struct JpegErrorManager {
  jpeg_error_mgr base;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

void jpeg_error_exit(j_common_ptr info) {
  auto* err = reinterpret_cast<JpegErrorManager*>(info->err);
  (*info->err->format_message)(info, err->message);
  std::longjmp(err->jump, 1);
}

Image read_jpeg(const fs::path& path) {
  std::unique_ptr<std::FILE, int (*)(std::FILE*)> file(std::fopen(path.c_str(), "rb"), &std::fclose);
  if (!file) throw FormatError("unreadable image " + path.string());
  jpeg_decompress_struct info{};
  JpegErrorManager err{};
  info.err = jpeg_std_error(&err.base);
  err.base.error_exit = jpeg_error_exit;
  std::vector<unsigned char> buf;
  std::size_t width = 0;
  std::size_t height = 0;
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&info);
    throw FormatError("unreadable image " + path.string() + ": " + err.message);
  }
  jpeg_create_decompress(&info);
  jpeg_stdio_src(&info, file.get());
  jpeg_read_header(&info, TRUE);
  info.out_color_space = JCS_RGB;
  jpeg_start_decompress(&info);
  width = info.output_width;
  height = info.output_height;
  buf.resize(width * height * 3);
  while (info.output_scanline < info.output_height) {
    JSAMPROW row = buf.data() + static_cast<std::size_t>(info.output_scanline) * width * 3;
    jpeg_read_scanlines(&info, &row, 1);
  }
  jpeg_finish_decompress(&info);
  jpeg_destroy_decompress(&info);
  Image out(width, height);
  std::span<float> px = out.data();
  for (std::size_t i = 0; i < px.size(); ++i) px[i] = static_cast<float>(buf[i]) / 255.0f;
  return out;
}

}  // namespace

Image read_image(const fs::path& path) {
  const std::string ext = lower_extension(path);
  if (ext == ".png") return read_png(path);
  if (ext == ".jpg" || ext == ".jpeg") return read_jpeg(path);
  throw FormatError("unsupported image format " + path.string());
}

void write_png(const fs::path& path, const Image& image) {
  std::vector<png_byte> buf(image.data().size());
  for (std::size_t i = 0; i < buf.size(); ++i) {
    buf[i] = static_cast<png_byte>(std::lround(std::clamp(image.data()[i], 0.0f, 1.0f) * 255.0f));
  }
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(image.width());
  img.height = static_cast<png_uint_32>(image.height());
  img.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&img, path.c_str(), 0, buf.data(), 0, nullptr)) {
    throw IoError("failed writing " + path.string() + ": " + img.message);
  }
}

BBox parse_box_line(std::string_view line, std::size_t line_no) {
  double v[4];
  std::size_t field = 0;
  while (true) {
    const std::size_t comma = line.find(',');
    const std::string_view token = line.substr(0, comma);
    if (field >= 4 || !parse_double(token, v[field])) {
      throw FormatError("malformed box on line " + std::to_string(line_no) + ": expected x,y,w,h");
    }
    ++field;
    if (comma == std::string_view::npos) break;
    line.remove_prefix(comma + 1);
  }
  if (field != 4) throw FormatError("malformed box on line " + std::to_string(line_no) + ": expected x,y,w,h");
  return {v[0], v[1], v[2], v[3]};
}

std::string format_box_line(const BBox& b) {
  return format_double(b.x) + "," + format_double(b.y) + "," + format_double(b.w) + "," + format_double(b.h);
}

std::vector<BBox> read_boxes(const fs::path& path) {
  const std::vector<std::string> lines = read_lines(path);
  std::vector<BBox> boxes;
  boxes.reserve(lines.size());
  for (std::size_t i = 0; i < lines.size(); ++i) {
    try {
      boxes.push_back(parse_box_line(lines[i], i + 1));
    } catch (const FormatError& e) {
      throw FormatError(path.string() + ": " + e.what());
    }
  }
  return boxes;
}

void write_boxes(const fs::path& path, std::span<const BBox> boxes) {
  std::string text;
  for (const BBox& b : boxes) text += format_box_line(b) + "\n";
  write_text(path, text);
}

std::vector<fs::path> list_frames(const fs::path& dir) {
  std::vector<fs::path> frames;
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(dir, ec)) {
    if (entry.is_regular_file() && is_image_file(entry.path())) frames.push_back(entry.path());
  }
  if (ec) throw IoError("cannot list " + dir.string() + ": " + ec.message());
  std::sort(frames.begin(), frames.end());
  return frames;
}

SequenceRecord load_sequence(const fs::path& dir) {
  const std::vector<fs::path> frames = list_frames(dir);
  const std::vector<BBox> boxes = read_boxes(dir / kGroundTruthFile);
  if (frames.size() != boxes.size()) {
    throw FormatError("count mismatch in " + dir.string() + ": " + std::to_string(frames.size()) + " frames, " +
                      std::to_string(boxes.size()) + " ground-truth lines");
  }
  SequenceRecord rec;
  rec.name = dir.filename().empty() ? dir.parent_path().filename().string() : dir.filename().string();
  rec.boxes = boxes;
  rec.frames.reserve(frames.size());
  for (const fs::path& f : frames) rec.frames.push_back(read_image(f));
  if (fs::exists(dir / kSceneConfigFile)) {
    std::ifstream in(dir / kSceneConfigFile);
    std::ostringstream ss;
    ss << in.rdbuf();
    rec.config_echo = ss.str();
  }
  return rec;
}

void export_sequence(const SequenceRecord& seq, const fs::path& dir) {
  if (seq.frames.size() != seq.boxes.size()) {
    throw ParameterError("export_sequence: " + std::to_string(seq.frames.size()) + " frames vs " +
                         std::to_string(seq.boxes.size()) + " boxes");
  }
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  for (std::size_t i = 0; i < seq.frames.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "%08zu.png", i + 1);
    write_png(dir / name, seq.frames[i]);
  }
  write_boxes(dir / kGroundTruthFile, seq.boxes);
  if (!seq.config_echo.empty()) write_text(dir / kSceneConfigFile, seq.config_echo);
}

std::vector<fs::path> find_sequence_dirs(const fs::path& root) {
  if (fs::exists(root / kGroundTruthFile)) return {root};
  std::vector<fs::path> dirs;
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(root, ec)) {
    if (entry.is_directory() && fs::exists(entry.path() / kGroundTruthFile)) dirs.push_back(entry.path());
  }
  if (ec) throw IoError("cannot list " + root.string() + ": " + ec.message());
  std::sort(dirs.begin(), dirs.end());
  return dirs;
}

DirectorySource::DirectorySource(std::vector<fs::path> dirs) {
  for (const fs::path& dir : dirs) {
    Entry e{list_frames(dir), read_boxes(dir / kGroundTruthFile)};
    if (e.frames.size() != e.boxes.size()) {
      throw FormatError("count mismatch in " + dir.string() + ": " + std::to_string(e.frames.size()) + " frames, " +
                        std::to_string(e.boxes.size()) + " ground-truth lines");
    }
    sequences_.push_back(std::move(e));
  }
}

void write_rois(const fs::path& path, std::span<const RoiDump> rois) {
  std::string text;
  for (const RoiDump& r : rois) {
    text += std::to_string(r.frame_index);
    for (double v : {r.window.cx, r.window.cy, r.window.w, r.window.h}) text += "," + format_double(v);
    for (double v : r.roi.cells) text += "," + format_double(v);
    text += "\n";
  }
  write_text(path, text);
}

std::vector<RoiDump> read_rois(const fs::path& path) {
  const std::vector<std::string> lines = read_lines(path);
  std::vector<RoiDump> out;
  out.reserve(lines.size());
  for (std::size_t n = 0; n < lines.size(); ++n) {
    std::string_view rest = lines[n];
    std::vector<double> values;
    values.reserve(5 + kRoiCells);
    while (true) {
      const std::size_t comma = rest.find(',');
      double v = 0.0;
      if (!parse_double(rest.substr(0, comma), v)) {
        throw FormatError(path.string() + ": malformed value on line " + std::to_string(n + 1));
      }
      values.push_back(v);
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (values.size() != 5 + kRoiCells) {
      throw FormatError(path.string() + ": line " + std::to_string(n + 1) + " has " + std::to_string(values.size()) +
                        " fields, expected " + std::to_string(5 + kRoiCells));
    }
    RoiDump d;
    d.frame_index = static_cast<std::size_t>(values[0]);
    d.window = {values[1], values[2], values[3], values[4]};
    std::copy(values.begin() + 5, values.end(), d.roi.cells.begin());
    out.push_back(d);
  }
  return out;
}

void write_report(const fs::path& path, const metric::ScoreReport& report) {
  std::ostringstream ss;
  metric::write_report_csv(ss, report);
  write_text(path, ss.str());
}

}  // namespace roitrack::io
