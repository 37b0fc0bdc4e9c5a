#include "erpdeck/signal_io.hpp"

#include <cstring>
#include <fstream>

#include <json.hpp>

namespace erpdeck::dsp {

using nlohmann::json;

namespace {
constexpr int kFormatVersion = 1;

json load_json(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), Errc::io_error, "cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    fail(Errc::io_error, "cannot parse " + path + ": " + e.what());
  }
  return j;
}

void save_json(const json& j, const std::string& path) {
  std::ofstream out(path);
  require(out.good(), Errc::io_error, "cannot open " + path + " for writing");
  out << j.dump(2) << '\n';
  require(out.good(), Errc::io_error, "write failed for " + path);
}
}  // namespace

void write_f32_blob(const std::string& path, const std::vector<double>& values) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), Errc::io_error, "cannot open " + path + " for writing");
  std::vector<float> buf(values.size());
  for (size_t i = 0; i < values.size(); ++i) buf[i] = static_cast<float>(values[i]);
  // Host is little-endian on every supported target; bytes go out as stored.
  out.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * sizeof(float)));
  require(out.good(), Errc::io_error, "write failed for " + path);
}

std::vector<double> read_f32_blob(const std::string& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  require(in.good(), Errc::io_error, "cannot open " + path);
  const std::streamsize bytes = in.tellg();
  require(bytes % sizeof(float) == 0, Errc::corrupt_model,
          path + ": size is not a multiple of 4 bytes");
  in.seekg(0);
  std::vector<float> buf(static_cast<size_t>(bytes) / sizeof(float));
  in.read(reinterpret_cast<char*>(buf.data()), bytes);
  require(in.good(), Errc::io_error, "read failed for " + path);
  return std::vector<double>(buf.begin(), buf.end());
}

void save_recording(const ContinuousRecording& rec, const std::string& prefix) {
  rec.validate();
  json meta;
  meta["version"] = kFormatVersion;
  meta["kind"] = "recording";
  meta["fs"] = rec.fs;
  meta["channels"] = rec.channels;
  meta["n_samples"] = rec.n_samples();
  json events = json::array();
  for (const Event& e : rec.events) {
    events.push_back({{"sample", e.sample}, {"command", e.command}, {"is_target", e.is_target}});
  }
  meta["events"] = std::move(events);
  save_json(meta, prefix + ".meta.json");
  write_f32_blob(prefix + ".f32", rec.data.raw());
}

ContinuousRecording load_recording(const std::string& prefix) {
  const json meta = load_json(prefix + ".meta.json");
  ContinuousRecording rec;
  try {
    require(meta.at("kind") == "recording", Errc::validation_error,
            prefix + ": kind is not 'recording'");
    rec.fs = meta.at("fs").get<double>();
    rec.channels = meta.at("channels").get<std::vector<std::string>>();
    const size_t n_samples = meta.at("n_samples").get<size_t>();
    for (const json& e : meta.at("events")) {
      rec.events.push_back({e.at("sample").get<int64_t>(), e.at("command").get<int>(),
                            e.at("is_target").get<bool>()});
    }
    std::vector<double> data = read_f32_blob(prefix + ".f32");
    require(data.size() == rec.channels.size() * n_samples, Errc::corrupt_model,
            prefix + ": blob length does not match channels * n_samples");
    rec.data = Tensor({rec.channels.size(), n_samples});
    rec.data.raw() = std::move(data);
  } catch (const json::exception& e) {
    fail(Errc::validation_error, prefix + ".meta.json: " + e.what());
  }
  rec.validate();
  return rec;
}

void save_epochs(const EpochTensor& e, const std::vector<std::string>& channels,
                 const std::string& prefix) {
  require(e.data.rank() == 3, Errc::shape_error, "epoch tensor must be rank 3");
  json meta;
  meta["version"] = kFormatVersion;
  meta["kind"] = "epochs";
  meta["fs"] = e.fs;
  meta["t0_ms"] = e.t0_ms;
  meta["dims"] = {e.n_trials(), e.n_channels(), e.n_samples()};
  meta["channels"] = channels;
  meta["labels"] = e.labels;
  meta["command_codes"] = e.command_codes;
  save_json(meta, prefix + ".meta.json");
  write_f32_blob(prefix + ".f32", e.data.raw());
}

EpochTensor load_epochs(const std::string& prefix, std::vector<std::string>* channels) {
  const json meta = load_json(prefix + ".meta.json");
  EpochTensor e;
  try {
    require(meta.at("kind") == "epochs", Errc::validation_error, prefix + ": kind is not 'epochs'");
    e.fs = meta.at("fs").get<double>();
    e.t0_ms = meta.at("t0_ms").get<double>();
    const auto dims = meta.at("dims").get<std::vector<size_t>>();
    require(dims.size() == 3, Errc::validation_error, prefix + ": dims must have 3 entries");
    e.labels = meta.at("labels").get<std::vector<int>>();
    e.command_codes = meta.at("command_codes").get<std::vector<int>>();
    if (channels) *channels = meta.at("channels").get<std::vector<std::string>>();
    std::vector<double> data = read_f32_blob(prefix + ".f32");
    require(data.size() == dims[0] * dims[1] * dims[2], Errc::corrupt_model,
            prefix + ": blob length does not match dims");
    require(e.labels.size() == dims[0] && e.command_codes.size() == dims[0],
            Errc::validation_error, prefix + ": labels/command_codes length mismatch");
    e.data = Tensor({dims[0], dims[1], dims[2]});
    e.data.raw() = std::move(data);
  } catch (const json::exception& ex) {
    fail(Errc::validation_error, prefix + ".meta.json: " + ex.what());
  }
  return e;
}

}  // namespace erpdeck::dsp
