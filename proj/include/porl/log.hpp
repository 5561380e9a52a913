// Training log: one record per evaluation point, serialized as CSV. Wall-clock
// lives in its own (last) column so determinism checks can strip it.
#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "porl/common.hpp"

namespace porl {

struct TrainRecord {
  std::int64_t env_step = 0;
  double eval_return_mean = 0;
  double eval_success_rate = 0;
  double critic_loss = 0;
  double actor_obj = 0;
  double alpha = 0;
  double q_mean = 0;
  double q_std = 0;
  double wall_s = 0;
};

inline bool operator==(const TrainRecord& a, const TrainRecord& b) {
  return a.env_step == b.env_step && a.eval_return_mean == b.eval_return_mean &&
         a.eval_success_rate == b.eval_success_rate && a.critic_loss == b.critic_loss &&
         a.actor_obj == b.actor_obj && a.alpha == b.alpha && a.q_mean == b.q_mean &&
         a.q_std == b.q_std && a.wall_s == b.wall_s;
}

inline constexpr const char* kTrainLogHeader =
    "env_step,eval_return_mean,eval_success_rate,critic_loss,actor_obj,alpha,q_mean,q_std,wall_s";

struct TrainLog {
  std::vector<TrainRecord> records;

  void append(const TrainRecord& r) {
    if (!records.empty() && r.env_step <= records.back().env_step)
      throw UsageError("train log: env_step must be strictly increasing");
    records.push_back(r);
  }
};

inline std::string csv_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string to_csv(const TrainLog& log) {
  std::ostringstream os;
  os << kTrainLogHeader << "\n";
  for (const auto& r : log.records) {
    os << r.env_step << "," << csv_double(r.eval_return_mean) << ","
       << csv_double(r.eval_success_rate) << "," << csv_double(r.critic_loss) << ","
       << csv_double(r.actor_obj) << "," << csv_double(r.alpha) << "," << csv_double(r.q_mean)
       << "," << csv_double(r.q_std) << "," << csv_double(r.wall_s) << "\n";
  }
  return os.str();
}

inline TrainLog train_log_from_csv(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  if (!std::getline(in, line) || line != kTrainLogHeader)
    throw IoError("train log: bad or missing CSV header");
  TrainLog log;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(ls, field, ',')) fields.push_back(field);
    if (fields.size() != 9) throw IoError("train log: expected 9 columns, got line '" + line + "'");
    TrainRecord r;
    r.env_step = std::stoll(fields[0]);
    r.eval_return_mean = std::stod(fields[1]);
    r.eval_success_rate = std::stod(fields[2]);
    r.critic_loss = std::stod(fields[3]);
    r.actor_obj = std::stod(fields[4]);
    r.alpha = std::stod(fields[5]);
    r.q_mean = std::stod(fields[6]);
    r.q_std = std::stod(fields[7]);
    r.wall_s = std::stod(fields[8]);
    log.append(r);
  }
  return log;
}

inline void save_train_log(const std::string& path, const TrainLog& log) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << to_csv(log);
  if (!out) throw IoError("short write: " + path);
}

inline TrainLog load_train_log(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return train_log_from_csv(buf.str());
}

// Drops the trailing wall-clock column from every line (header included);
// what remains must be byte-identical across reruns of the same config.
inline std::string strip_wall_column(const std::string& csv) {
  std::istringstream in(csv);
  std::ostringstream out;
  std::string line;
  while (std::getline(in, line)) {
    const std::size_t cut = line.rfind(',');
    out << (cut == std::string::npos ? line : line.substr(0, cut)) << "\n";
  }
  return out.str();
}

}  // namespace porl
