#include "dagsched/cost_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include "dagsched/errors.hpp"
#include "dagsched/placers.hpp"
#include "json.hpp"

namespace dagsched {

namespace {

micros_t round_half_up(double v) {
  return static_cast<micros_t>(std::floor(v + 0.5));
}

// Uniform draw in [lo, hi) built from the top 53 bits of the generator, so
// results do not depend on the standard library's distribution internals.
double uniform_unit(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace

micros_t comm_time(const CommModel& cm, bytes_t bytes) {
  if (bytes < 0) {
    throw ValidationError("comm_time: negative byte count");
  }
  return round_half_up(cm.intercept_us +
                       cm.us_per_byte * static_cast<double>(bytes));
}

CommModel fit_comm_model(
    const std::vector<std::pair<bytes_t, micros_t>>& samples) {
  if (samples.size() < 2) {
    throw ValidationError("fit_comm_model: need at least 2 samples");
  }
  double n = static_cast<double>(samples.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& [bytes, us] : samples) {
    double x = static_cast<double>(bytes);
    double y = static_cast<double>(us);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  double denom = n * sxx - sx * sx;
  if (denom <= 0) {
    throw ValidationError(
        "fit_comm_model: degenerate samples, all byte counts equal");
  }
  double slope = (n * sxy - sx * sy) / denom;
  double intercept = (sy - slope * sx) / n;
  if (slope < 0) {
    slope = 0;
    intercept = sy / n;
  }
  if (intercept < 0) {
    intercept = 0;
    slope = sxx > 0 ? std::max(0.0, sxy / sxx) : 0.0;
  }
  return CommModel{intercept, slope, CommMode::Sequential};
}

CommModel parse_comm_model(const std::string& json_text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("parse error: ") + e.what());
  }
  if (!doc.is_object()) {
    throw ValidationError("parse error: comm model must be a JSON object");
  }
  for (const auto& item : doc.items()) {
    if (item.key() != "intercept_us" && item.key() != "us_per_byte" &&
        item.key() != "mode") {
      throw ValidationError("parse error: unknown key \"" + item.key() +
                            "\" in comm model");
    }
  }
  for (const char* key : {"intercept_us", "us_per_byte", "mode"}) {
    if (!doc.contains(key)) {
      throw ValidationError(std::string("parse error: missing key \"") + key +
                            "\" in comm model");
    }
  }
  CommModel cm;
  if (!doc["intercept_us"].is_number() || !doc["us_per_byte"].is_number()) {
    throw ValidationError("parse error: comm model fields must be numbers");
  }
  cm.intercept_us = doc["intercept_us"].get<double>();
  cm.us_per_byte = doc["us_per_byte"].get<double>();
  if (cm.intercept_us < 0 || cm.us_per_byte < 0) {
    throw ValidationError("comm model coefficients must be non-negative");
  }
  std::string mode = doc["mode"].get<std::string>();
  if (mode == "sequential") {
    cm.mode = CommMode::Sequential;
  } else if (mode == "parallel") {
    cm.mode = CommMode::Parallel;
  } else {
    throw ValidationError("comm model mode must be sequential or parallel");
  }
  return cm;
}

CommModel load_comm_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ValidationError("cannot open comm model file: " + path);
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_comm_model(buf.str());
}

void save_comm_model(const CommModel& cm, const std::string& path) {
  nlohmann::ordered_json doc;
  doc["intercept_us"] = cm.intercept_us;
  doc["us_per_byte"] = cm.us_per_byte;
  doc["mode"] = cm.mode == CommMode::Sequential ? "sequential" : "parallel";
  std::ofstream out(path);
  if (!out) {
    throw ValidationError("cannot write comm model file: " + path);
  }
  out << doc.dump(2) << "\n";
}

std::vector<std::pair<bytes_t, micros_t>> load_comm_samples(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ValidationError("cannot open samples file: " + path);
  }
  std::string line;
  if (!std::getline(in, line) || line != "bytes,us") {
    throw ValidationError("samples file must start with header bytes,us");
  }
  std::vector<std::pair<bytes_t, micros_t>> samples;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string a, b;
    if (!std::getline(row, a, ',') || !std::getline(row, b)) {
      throw ValidationError("malformed samples row: " + line);
    }
    samples.emplace_back(std::stoll(a), std::stoll(b));
  }
  return samples;
}

bytes_t static_bytes(const MetaNode& m, MemoryMode mode) {
  return mode == MemoryMode::TrainingPersistent
             ? m.perm_mem_bytes + m.out_mem_bytes
             : m.perm_mem_bytes;
}

ScalarReport compute_scalars(const GroupedGraph& gg,
                             const DeviceRoster& roster, const CommModel& cm,
                             MemoryMode mode) {
  if (gg.node_count() == 0) {
    throw ValidationError("compute_scalars: empty graph");
  }
  ScalarReport report;
  micros_t max_comm = 0;
  for (const MetaEdge& e : gg.edges) {
    max_comm = std::max(max_comm, comm_time(cm, e.tensor_bytes));
  }
  micros_t min_compute = std::numeric_limits<micros_t>::max();
  for (const MetaNode& m : gg.nodes) {
    if (m.compute_time_us > 0) {
      min_compute = std::min(min_compute, m.compute_time_us);
    } else {
      report.has_zero_compute = true;
    }
  }
  if (min_compute == std::numeric_limits<micros_t>::max()) {
    report.rho = std::numeric_limits<double>::infinity();
  } else {
    report.rho =
        static_cast<double>(max_comm) / static_cast<double>(min_compute);
  }
  report.sct_assumption_holds = report.rho <= 1.0;

  bytes_t total_required = 0;
  bytes_t max_required = 0;
  for (const MetaNode& m : gg.nodes) {
    bytes_t d = static_bytes(m, mode);
    total_required += d;
    max_required = std::max(max_required, d);
  }
  bytes_t min_capacity = roster.min_capacity();
  double n = static_cast<double>(roster.devices.size());
  report.K = total_required > 0
                 ? n * static_cast<double>(min_capacity) /
                       static_cast<double>(total_required)
                 : std::numeric_limits<double>::infinity();
  report.J =
      static_cast<double>(max_required) / static_cast<double>(min_capacity);
  report.single_task_oversized = report.J >= 1.0;
  return report;
}

GroupedGraph perturb_profiles(const GroupedGraph& gg, double fraction,
                              std::uint64_t seed) {
  if (fraction < 0 || fraction >= 1) {
    throw ValidationError("perturb fraction must be in [0, 1)");
  }
  GroupedGraph out = gg;
  if (fraction == 0) return out;
  std::mt19937_64 rng(seed);
  auto scaled = [&](std::int64_t v) {
    double factor = 1.0 - fraction + 2.0 * fraction * uniform_unit(rng);
    std::int64_t r = round_half_up(static_cast<double>(v) * factor);
    if (v > 0 && r < 1) r = 1;
    return r;
  };
  for (MetaNode& m : out.nodes) {
    m.compute_time_us = scaled(m.compute_time_us);
  }
  for (MetaEdge& e : out.edges) {
    e.tensor_bytes = scaled(e.tensor_bytes);
  }
  return out;
}

micros_t max_comm_time(const GroupedGraph& gg, const CommModel& cm) {
  micros_t best = 0;
  for (const MetaEdge& e : gg.edges) {
    best = std::max(best, comm_time(cm, e.tensor_bytes));
  }
  return best;
}

}  // namespace dagsched
