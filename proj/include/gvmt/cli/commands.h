#pragma once

#include <filesystem>
#include <iosfwd>
#include <vector>

#include "gvmt/errors.h"
#include "gvmt/eval/disambiguation.h"

namespace gvmt::cli {

// 0 success, 2 shape/config/usage error, 3 data error, 4 numeric failure.
int exit_code_for(const std::exception& e);

// Parses argv and runs one subcommand; never throws.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

// JSONL with video_id, seg_idx and tgt per line; other keys are ignored, so
// a corpus split file reads as its own reference translations.
std::vector<eval::DecodedSample> load_translations(const std::filesystem::path& path);
void write_translations(std::span<const eval::DecodedSample> rows, const std::filesystem::path& path);

}  // namespace gvmt::cli
