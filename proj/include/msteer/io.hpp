#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "msteer/control.hpp"
#include "msteer/fmp.hpp"
#include "msteer/grid.hpp"
#include "msteer/measures.hpp"
#include "msteer/pmp.hpp"

namespace msteer {

/// %.17g
std::string format_number(double v);

/// "a,b,value", one row per cell center, a-major.
void write_grid_csv(const std::filesystem::path& path, const GridField& field);
void write_grid_csv(const std::filesystem::path& path, const GridMeasure& measure);
/// Rebuilds the grid from the listed centers (uniform spacing, full rectangle).
GridField read_grid_csv(const std::filesystem::path& path);

/// "x1,x2,weight"
void write_empirical_csv(const std::filesystem::path& path, const EmpiricalMeasure& m);
EmpiricalMeasure read_empirical_csv(const std::filesystem::path& path);

/// "t_start,t_end,u1..um"
void write_control_csv(const std::filesystem::path& path, const ControlSignal& u);
ControlSignal read_control_csv(const std::filesystem::path& path);

/// "iter,accepted,cost,alpha,diam_pi,mass_loss_mu,mass_loss_nu"; row 0 is the initial control.
void write_ledger_csv(const std::filesystem::path& path, const FmpReport& report);

/// "t,residual,sigma_1..sigma_m"
void write_residual_csv(const std::filesystem::path& path, const ResidualReport& report);

/// Splits one CSV line on commas and trims blanks around each cell.
std::vector<std::string> split_csv_line(const std::string& line);

}  // namespace msteer
