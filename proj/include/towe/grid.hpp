#ifndef TOWE_GRID_HPP
#define TOWE_GRID_HPP

#include <string>
#include <vector>

#include "towe/config.hpp"
#include "towe/eval.hpp"

namespace towe {

struct CellResult {
  std::string model_label;
  std::string dataset;
  bool ok = false;
  std::string error;
  AggregateReport report;
  int gcn_layers = 0;  // layer count actually used (tuned or fixed)
  std::vector<std::uint64_t> seeds_used;
};

struct GridReport {
  std::vector<std::string> row_labels;
  std::vector<std::string> datasets;
  std::vector<CellResult> cells;  // row-major over (row_labels x datasets)

  const CellResult& cell(std::size_t row, std::size_t col) const {
    return cells[row * datasets.size() + col];
  }
};

// Trains and evaluates every (model row, dataset) cell across seeds. Cells
// run in a bounded worker pool; each cell is deterministic in its seeds, so
// the report does not depend on scheduling. Failures are recorded per cell
// and do not stop the grid.
GridReport run_grid(const ExperimentConfig& cfg, int jobs = 0);

std::string render_grid_table(const GridReport& report);
nlohmann::json grid_report_to_json(const GridReport& report);

}  // namespace towe

#endif
