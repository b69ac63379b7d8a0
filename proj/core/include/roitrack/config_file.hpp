#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "roitrack/extractor.hpp"
#include "roitrack/pipeline.hpp"
#include "roitrack/synth.hpp"

// Flat "key = value" text files; '#' starts a comment. Keys mirror the
// fields of SceneConfig, TrackerConfig and TrainOptions. Unknown keys are
// errors.
namespace roitrack::config {

struct Entry {
  std::string key;
  std::string value;
  std::size_t line = 0;
};

using Entries = std::vector<Entry>;

/// Throws FormatError naming the line for lines without '='.
Entries parse(std::istream& in, const std::string& source_name);
Entries read_file(const std::filesystem::path& path);

/// Each throws FormatError on an unknown key or unparsable value.
void apply(const Entries& entries, synth::SceneConfig& scene);
void apply(const Entries& entries, pipeline::TrackerConfig& tracker);
void apply(const Entries& entries, extractor::TrainOptions& train);

std::string to_text(const synth::SceneConfig& scene);

}  // namespace roitrack::config
