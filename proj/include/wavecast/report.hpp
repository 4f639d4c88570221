#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "wavecast/field.hpp"
#include "wavecast/metrics.hpp"

namespace wavecast::report {

struct CaseRow {
  std::string method;
  std::string case_id;
  double ssim = 0.0;
  double psnr_db = 0.0;
  double mse = 0.0;
  double dice = 0.0;
  double hd95_vox = 0.0;
  double assd_vox = 0.0;
  double surface_dice_1vox = 0.0;
  double highfreq_frac = 0.0;
  double lowfreq_frac = 0.0;
  double pred_vol = 0.0;
  double gt_vol = 0.0;
  double abs_vol_err_pct = 0.0;
  double com_err_vox = 0.0;
};

struct EvalOptions {
  double tau = 0.5;
  double spectral_cutoff = 0.5;
};

// Metric columns in contract order (after method and case).
const std::vector<std::string>& metric_columns();
std::vector<double> metric_values(const CaseRow& row);

// Surface and volume metrics that are undefined for the case (empty masks) are NaN.
CaseRow evaluate_case(const std::string& method, const std::string& case_id, const RealField& pred,
                      const RealField& gt, const EvalOptions& opts = {});

std::string csv_header();
std::string to_csv(const std::vector<CaseRow>& rows);
// Per-method means over finite values, with the count of rows and of NaN entries.
nlohmann::json aggregate(const std::vector<CaseRow>& rows);

// Shortest text that reads back as the same double; "nan" for NaN.
std::string format_number(double v);

}  // namespace wavecast::report
