#pragma once

#include <cctype>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "vitaltrace/error.hpp"
#include "vitaltrace/image.hpp"

namespace vitaltrace {

struct SequenceManifest {
  double fps = 30.0;
  std::size_t frame_count = 0;
  int width = 0;
  int height = 0;
  // printf-style pattern with a single zero-padded integer, e.g. "frame_%06d.ppm".
  std::string frame_name_pattern = "frame_%06d.ppm";

  bool operator==(const SequenceManifest&) const = default;
};

namespace detail {

struct NamePattern {
  std::string prefix;
  std::string suffix;
  int width = 0;
};

inline NamePattern parse_name_pattern(const std::string& pattern) {
  const auto pct = pattern.find('%');
  if (pct == std::string::npos || pattern.find('%', pct + 1) != std::string::npos)
    throw DataError("frame_name_pattern must contain exactly one %0Nd placeholder: " +
                    pattern);
  std::size_t i = pct + 1;
  int width = 0;
  while (i < pattern.size() && std::isdigit(static_cast<unsigned char>(pattern[i]))) {
    width = width * 10 + (pattern[i] - '0');
    ++i;
  }
  if (i >= pattern.size() || pattern[i] != 'd')
    throw DataError("frame_name_pattern placeholder must be of the form %0Nd: " + pattern);
  return {pattern.substr(0, pct), pattern.substr(i + 1), width};
}

}  // namespace detail

inline std::string frame_file_name(const std::string& pattern, std::size_t index) {
  const auto p = detail::parse_name_pattern(pattern);
  std::string digits = std::to_string(index);
  if (static_cast<int>(digits.size()) < p.width)
    digits.insert(0, static_cast<std::size_t>(p.width) - digits.size(), '0');
  return p.prefix + digits + p.suffix;
}

inline void validate(const SequenceManifest& m) {
  if (!(m.fps > 0.0)) throw DataError("manifest: fps must be > 0");
  if (m.frame_count < 2) throw DataError("manifest: frame_count must be >= 2");
  if (m.width <= 0 || m.height <= 0)
    throw DataError("manifest: width and height must be positive");
  detail::parse_name_pattern(m.frame_name_pattern);
}

inline nlohmann::json to_json(const SequenceManifest& m) {
  return {{"fps", m.fps},
          {"frame_count", m.frame_count},
          {"width", m.width},
          {"height", m.height},
          {"frame_name_pattern", m.frame_name_pattern}};
}

inline SequenceManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest " + path.string());
  SequenceManifest m;
  try {
    const auto j = nlohmann::json::parse(in);
    m.fps = j.at("fps").get<double>();
    m.frame_count = j.at("frame_count").get<std::size_t>();
    m.width = j.at("width").get<int>();
    m.height = j.at("height").get<int>();
    m.frame_name_pattern = j.at("frame_name_pattern").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError("manifest " + path.string() + ": " + e.what());
  }
  validate(m);
  return m;
}

inline void save_manifest(const SequenceManifest& m, const std::filesystem::path& path) {
  validate(m);
  std::ofstream out(path);
  if (!out) throw DataError("cannot write manifest " + path.string());
  out << to_json(m).dump(2) << '\n';
}

// Binary P6 PPM with maxval 255.
inline std::vector<std::uint8_t> encode_ppm(const Frame& frame) {
  const std::string header = "P6\n" + std::to_string(frame.width) + " " +
                             std::to_string(frame.height) + "\n255\n";
  std::vector<std::uint8_t> bytes(header.begin(), header.end());
  bytes.reserve(header.size() + frame.pixel_count() * 3);
  for (std::size_t i = 0; i < frame.pixel_count(); ++i) {
    bytes.push_back(frame.red[i]);
    bytes.push_back(frame.green[i]);
    bytes.push_back(frame.blue[i]);
  }
  return bytes;
}

inline Frame decode_ppm(std::span<const std::uint8_t> bytes, std::size_t index = 0) {
  std::size_t pos = 0;
  const auto skip_space_and_comments = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
  };
  const auto read_uint = [&](const char* what) {
    skip_space_and_comments();
    const std::size_t start = pos;
    long value = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
      value = value * 10 + (bytes[pos] - '0');
      if (value > 1'000'000) throw DecodeError(start, std::string(what) + " too large");
      ++pos;
    }
    if (pos == start) throw DecodeError(start, std::string("expected ") + what);
    return value;
  };

  if (bytes.size() < 2 || bytes[0] != 'P')
    throw DecodeError(0, "missing PPM magic");
  if (bytes[1] != '6')
    throw DecodeError(1, std::string("unsupported PPM variant P") +
                             static_cast<char>(bytes[1]) + " (only binary P6)");
  pos = 2;
  const long width = read_uint("width");
  const long height = read_uint("height");
  const std::size_t maxval_pos = pos;
  const long maxval = read_uint("maxval");
  if (width <= 0 || height <= 0) throw DecodeError(maxval_pos, "zero dimension");
  if (maxval != 255) throw DecodeError(maxval_pos, "maxval must be 255");
  if (pos >= bytes.size() || !std::isspace(bytes[pos]))
    throw DecodeError(pos, "expected single whitespace after maxval");
  ++pos;

  Frame frame(static_cast<int>(width), static_cast<int>(height), index);
  const std::size_t payload = frame.pixel_count() * 3;
  if (bytes.size() - pos < payload)
    throw DecodeError(bytes.size(), "truncated payload: expected " +
                                        std::to_string(payload) + " bytes after offset " +
                                        std::to_string(pos));
  for (std::size_t i = 0; i < frame.pixel_count(); ++i) {
    frame.red[i] = bytes[pos + 3 * i];
    frame.green[i] = bytes[pos + 3 * i + 1];
    frame.blue[i] = bytes[pos + 3 * i + 2];
  }
  return frame;
}

inline void write_ppm(const Frame& frame, const std::filesystem::path& path) {
  const auto bytes = encode_ppm(frame);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

// BT.601 luma scaled to [0, 1].
inline GrayFrame to_gray(const Frame& frame) {
  GrayFrame gray(frame.width, frame.height, 0.0f, frame.index);
  for (std::size_t i = 0; i < frame.pixel_count(); ++i) {
    const double y = 0.299 * frame.red[i] + 0.587 * frame.green[i] + 0.114 * frame.blue[i];
    gray.luma[i] = static_cast<float>(std::min(1.0, y / 255.0));
  }
  return gray;
}

// Lazily reads the frames named by a manifest, in index order. Only the
// current frame is held in memory.
class FrameSequence {
 public:
  explicit FrameSequence(const std::filesystem::path& manifest_path)
      : manifest_(load_manifest(manifest_path)), dir_(manifest_path.parent_path()) {}

  FrameSequence(SequenceManifest manifest, std::filesystem::path dir)
      : manifest_(std::move(manifest)), dir_(std::move(dir)) {
    validate(manifest_);
  }

  const SequenceManifest& manifest() const noexcept { return manifest_; }
  std::size_t size() const noexcept { return manifest_.frame_count; }

  std::filesystem::path frame_path(std::size_t index) const {
    return dir_ / frame_file_name(manifest_.frame_name_pattern, index);
  }

  Frame read(std::size_t index) const {
    const auto path = frame_path(index);
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IngestError(index, "missing frame file " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    Frame frame;
    try {
      frame = decode_ppm(bytes, index);
    } catch (const DecodeError& e) {
      throw IngestError(index, path.string() + ": " + e.what());
    }
    if (frame.width != manifest_.width || frame.height != manifest_.height)
      throw DataError("frame " + std::to_string(index) + " is " +
                      std::to_string(frame.width) + "x" + std::to_string(frame.height) +
                      ", manifest says " + std::to_string(manifest_.width) + "x" +
                      std::to_string(manifest_.height));
    return frame;
  }

  class iterator {
   public:
    using iterator_category = std::input_iterator_tag;
    using value_type = Frame;
    using difference_type = std::ptrdiff_t;
    using pointer = const Frame*;
    using reference = const Frame&;

    iterator() = default;
    iterator(const FrameSequence* seq, std::size_t index) : seq_(seq), index_(index) {
      load();
    }

    reference operator*() const { return current_; }
    pointer operator->() const { return &current_; }
    iterator& operator++() {
      ++index_;
      load();
      return *this;
    }
    void operator++(int) { ++*this; }
    bool operator==(const iterator& other) const { return index_ == other.index_; }

   private:
    void load() {
      if (seq_ && index_ < seq_->size()) current_ = seq_->read(index_);
    }

    const FrameSequence* seq_ = nullptr;
    std::size_t index_ = 0;
    Frame current_;
  };

  iterator begin() const { return iterator(this, 0); }
  iterator end() const { return iterator(nullptr, size()); }

 private:
  SequenceManifest manifest_;
  std::filesystem::path dir_;
};

}  // namespace vitaltrace
