#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "wfr/dynamic_solver.hpp"
#include "wfr/gradient_flow.hpp"
#include "wfr/otto.hpp"

namespace wfr::io {

using json = nlohmann::json;

/// Raised for unreadable files and documents that do not match a schema.
class FormatError : public InvalidArgument {
public:
    using InvalidArgument::InvalidArgument;
};

json read_json(const std::filesystem::path& file);
void write_json(const std::filesystem::path& file, const json& doc);
void write_text(const std::filesystem::path& file, const std::string& text);

/// Fixed CSV number format: 10 significant digits.
std::string csv_number(double v);

// {"dim","shape","spacing","origin","values"}; unknown keys are rejected.
Grid grid_from_json(const json& j);
json to_json(const GridMeasure& rho);
GridMeasure grid_measure_from_json(const json& j);

// {"atoms":[{"x":[...],"k":v},...]}
json to_json(const DiracMeasure& mu);
DiracMeasure dirac_measure_from_json(const json& j);

/// True when the document looks like a DiracMeasure rather than a grid.
bool is_dirac_json(const json& j);

/// A grid measure file, or a Dirac file rasterised on `grid` with width
/// `sigma` (2h when sigma <= 0). Dirac files require a grid.
GridMeasure load_measure(const std::filesystem::path& file, const Grid* grid = nullptr, double sigma = 0.0);

/// Potential file: the grid keys plus "u" (any sign); the gradient is
/// formed by centred differences.
PotentialField potential_from_json(const json& j);
json to_json(const PotentialField& pot);

// {"nt","max_iter","tol_feas","tol_gap","sigma_blob"} plus the optional
// tuning keys "step_ratio","adaptive_steps","relaxation","check_every".
SolverOptions solver_options_from_json(const json& j);
json to_json(const SolverOptions& opts);
json to_json(const SolverReport& rep);

/// Writes frame_NNNN.json per time level plus index.json. Returns the number
/// of frame files written.
int write_path(const std::filesystem::path& dir, const SpaceTimePath& path);
SpaceTimePath read_path(const std::filesystem::path& dir);

/// Header t,particle_id,x[,y],k; one row per particle and sample.
std::string trajectory_csv(const Trajectory& traj);

/// Header t,entropy,dissipation,mass,l2_error,min_rho.
std::string flow_trace_csv(const FlowTrace& trace);

json to_json(const HessianComparison& h);
json to_json(const BecknerCertificate& cert);
BecknerCertificate beckner_certificate_from_json(const json& j);

}  // namespace wfr::io
