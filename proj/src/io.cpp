#include "cfee/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace cfee {

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", x);
  return buf;
}

Json arr_to_json(const Arr& a) {
  Json j = Json::array();
  for (Eigen::Index i = 0; i < a.size(); ++i) j.push_back(a[i]);
  return j;
}

Json mat_to_json(const Mat& m) {
  Json j = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    j.push_back(row);
  }
  return j;
}

Arr arr_from_json(const Json& j) {
  Arr a(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) a[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  return a;
}

Mat mat_from_json(const Json& j) {
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows > 0 ? static_cast<Eigen::Index>(j[0].size()) : 0;
  Mat m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    if (static_cast<Eigen::Index>(j[r].size()) != cols) {
      throw config_error("ragged matrix in JSON input");
    }
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = j[r][c].get<double>();
  }
  return m;
}

Json allocation_to_json(const PowerAllocation& v) {
  return Json{{"q", mat_to_json(v.q)}, {"p", mat_to_json(v.p)}, {"rho", arr_to_json(v.rho)}};
}

PowerAllocation allocation_from_json(const Json& j) {
  PowerAllocation v;
  v.q = mat_from_json(j.at("q"));
  v.p = mat_from_json(j.at("p"));
  v.rho = arr_from_json(j.at("rho"));
  return v;
}

Json report_to_json(const PerfReport& r, const ConstraintSlacks& s) {
  Json j;
  j["unicast_rate_nats"] = arr_to_json(r.r_unicast);
  j["multicast_rate_ue_nats"] = arr_to_json(r.r_multicast_ue);
  j["multicast_rate_group_nats"] = arr_to_json(r.r_multicast);
  j["received_rf_w"] = arr_to_json(r.phi_e);
  j["harvester_input_w"] = arr_to_json(r.p_in);
  j["harvested_w"] = arr_to_json(r.harvested);
  j["backhaul_nats"] = arr_to_json(r.c_bh);
  j["backhaul_smooth_nats"] = arr_to_json(r.c_bh_smooth);
  j["ap_transmit_w"] = arr_to_json(r.p_tr);
  j["total_power_w"] = r.p_total;
  j["total_power_smooth_w"] = r.p_total_smooth;
  j["sum_rate_nats"] = r.sum_rate_nats;
  j["ee_bits_per_joule"] = r.ee_bits_per_joule;
  j["ee_smooth_bits_per_joule"] = r.ee_smooth_bits_per_joule;
  j["slacks"] = Json{{"multicast_rate", arr_to_json(s.mc_rate)},
                     {"unicast_rate", arr_to_json(s.uc_rate)},
                     {"energy", arr_to_json(s.energy)},
                     {"backhaul", arr_to_json(s.backhaul)},
                     {"power", arr_to_json(s.power)},
                     {"min", s.min_slack()}};
  return j;
}

std::string trace_csv(const SolveTrace& trace) {
  std::string out = "t,c,s,dual_value,ee_nats,ee_bits_per_joule,max_violation\n";
  for (const TraceRow& r : trace.rows) {
    out += std::to_string(r.sca_round);
    out += ',';
    out += std::to_string(r.dinkelbach_iter);
    out += ',';
    out += std::to_string(r.inner_iter);
    out += ',';
    out += format_double(r.dual_value);
    out += ',';
    out += format_double(r.ee_nats);
    out += ',';
    out += format_double(r.ee_bits_per_joule);
    out += ',';
    out += format_double(r.max_violation);
    out += '\n';
  }
  return out;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out =
      "axis,value,seed,status,ee_bits_per_joule,ee_smooth_bits_per_joule,"
      "p_total_w,sum_rate_nats,min_slack,sca_rounds,inner_iterations\n";
  for (const SweepRow& r : rows) {
    out += r.axis;
    out += ',';
    out += format_double(r.value);
    out += ',';
    out += std::to_string(r.seed);
    out += ',';
    out += std::to_string(r.status);
    out += ',';
    out += format_double(r.ee_bits_per_joule);
    out += ',';
    out += format_double(r.ee_smooth_bits_per_joule);
    out += ',';
    out += format_double(r.p_total_w);
    out += ',';
    out += format_double(r.sum_rate_nats);
    out += ',';
    out += format_double(r.min_slack);
    out += ',';
    out += std::to_string(r.sca_rounds);
    out += ',';
    out += std::to_string(r.inner_iterations);
    out += '\n';
  }
  return out;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw config_error("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw config_error("cannot write file: " + path);
  out << content;
}

}  // namespace cfee
