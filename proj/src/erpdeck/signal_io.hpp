#pragma once

#include <string>
#include <vector>

#include "erpdeck/signal.hpp"

namespace erpdeck::dsp {

// Recording container: `<prefix>.meta.json` describing the stream plus
// `<prefix>.f32` holding raw little-endian 32-bit floats, channel-major.
void save_recording(const ContinuousRecording& rec, const std::string& prefix);
ContinuousRecording load_recording(const std::string& prefix);

// Epoch container: same pair of files with dims/labels in the JSON header,
// data laid out (trials, channels, samples).
void save_epochs(const EpochTensor& e, const std::vector<std::string>& channels,
                 const std::string& prefix);
EpochTensor load_epochs(const std::string& prefix, std::vector<std::string>* channels = nullptr);

// Raw little-endian float32 blob helpers (shared with model weight files).
void write_f32_blob(const std::string& path, const std::vector<double>& values);
std::vector<double> read_f32_blob(const std::string& path);

}  // namespace erpdeck::dsp
