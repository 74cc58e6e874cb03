#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "snptree/dataset.hpp"
#include "snptree/hiertest.hpp"

namespace snptree {

struct CorrelationSpec {
  enum class Kind { independent, ar1, block };
  Kind kind = Kind::independent;
  double rho = 0.0;
  int block_size = 0;  // block kind only
};

CorrelationSpec correlation_from_string(const std::string& s);
std::string to_string(const CorrelationSpec& c);

enum class SimMethod { tippett, stouffer, pooling };
std::string to_string(SimMethod m);

struct SimScenario {
  int m = 1;
  std::vector<int> n;         // per study
  int p = 0;
  int s0 = 10;                // active-set size
  std::vector<double> beta;   // per-study value on the active set
  std::vector<double> sigma;  // per-study noise sd
  Family family = Family::gaussian;
  CorrelationSpec correlation;
  std::uint64_t seed = 1;
  int replicates = 100;
  int B = 50;
  double alpha = 0.05;
  double gamma_min = 0.05;
  enum class Tree { var, position } tree = Tree::var;
  std::vector<SimMethod> methods{SimMethod::tippett};
};

// Key-value scenario text ("key = value", '#' comments). Malformed lines
// raise bad_format with the line number.
SimScenario parse_scenario(const std::string& text);
SimScenario load_scenario(const std::string& path);

// Columns drawn as {0,1,2} by thresholding correlated latent Gaussians at
// +-0.75 standard deviations; fixed given the seed. Constant or duplicated
// columns are re-drawn independently so every design is full of usable
// columns.
Eigen::MatrixXd gen_design(int n, int p, const CorrelationSpec& correlation, std::uint64_t seed);

Eigen::VectorXd gen_response(const Eigen::MatrixXd& x, const Eigen::VectorXd& beta, double sigma,
                             Family family, std::uint64_t seed);

// Power_adap = (1/|S0|) * sum over true minimal detections of 1/|C|.
// Findings must already be minimal (hiertest emits only such clusters).
double adaptive_power(const std::vector<ClusterFinding>& findings,
                      const std::vector<std::string>& active_names);

struct MethodReport {
  SimMethod method;
  double adaptive_power = 0.0;
  double fwer = 0.0;      // fraction of replicates with a false detection
  double fwer_se = 0.0;   // binomial standard error
};

struct ReplicateLog {
  int replicate = 0;
  SimMethod method;
  double power = 0.0;
  int findings = 0;
  bool false_detection = false;
};

struct PowerReport {
  SimScenario scenario;
  std::vector<MethodReport> methods;
  std::vector<ReplicateLog> log;
};

PowerReport run_experiment(const SimScenario& scenario, int threads = 0);

// Delimited report ready for plotting: a summary block and the per-replicate log.
std::string report_csv(const PowerReport& report);

}  // namespace snptree
