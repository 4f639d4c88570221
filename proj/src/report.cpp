#include "wavecast/report.hpp"

#include <charconv>
#include <cmath>
#include <limits>
#include <map>

#include "wavecast/errors.hpp"

namespace wavecast::report {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

const std::vector<std::string>& metric_columns() {
  static const std::vector<std::string> cols{"ssim",          "psnr_db",       "mse",      "dice",
                                             "hd95_vox",      "assd_vox",      "surface_dice_1vox",
                                             "highfreq_frac", "lowfreq_frac",  "pred_vol", "gt_vol",
                                             "abs_vol_err_pct", "com_err_vox"};
  return cols;
}

std::vector<double> metric_values(const CaseRow& r) {
  return {r.ssim,          r.psnr_db,      r.mse,      r.dice,   r.hd95_vox,        r.assd_vox,   r.surface_dice_1vox,
          r.highfreq_frac, r.lowfreq_frac, r.pred_vol, r.gt_vol, r.abs_vol_err_pct, r.com_err_vox};
}

CaseRow evaluate_case(const std::string& method, const std::string& case_id, const RealField& pred,
                      const RealField& gt, const EvalOptions& opts) {
  CaseRow r;
  r.method = method;
  r.case_id = case_id;
  r.mse = metrics::mse(pred, gt);
  r.psnr_db = metrics::psnr_from_mse(r.mse);
  r.ssim = metrics::ssim(pred, gt);
  const auto pm = metrics::threshold(pred, opts.tau);
  const auto gm = metrics::threshold(gt, opts.tau);
  r.dice = metrics::dice(pm, gm);
  try {
    const auto s = metrics::surface_metrics(pm, gm);
    r.hd95_vox = s.hd95_vox;
    r.assd_vox = s.assd_vox;
    r.surface_dice_1vox = s.surface_dice_1vox;
  } catch (const MetricError&) {
    r.hd95_vox = r.assd_vox = r.surface_dice_1vox = kNaN;
  }
  const auto sp = metrics::spectral_split(pred, gt, opts.spectral_cutoff);
  r.highfreq_frac = sp.highfreq_frac;
  r.lowfreq_frac = sp.lowfreq_frac;
  r.pred_vol = static_cast<double>(pm.count());
  r.gt_vol = static_cast<double>(gm.count());
  try {
    const auto v = metrics::volume_com(pm, gm);
    r.abs_vol_err_pct = v.abs_vol_err_pct;
    r.com_err_vox = v.com_err_vox;
  } catch (const MetricError&) {
    r.abs_vol_err_pct = r.com_err_vox = kNaN;
  }
  return r;
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string csv_header() {
  std::string h = "method,case";
  for (const auto& c : metric_columns()) h += "," + c;
  return h;
}

std::string to_csv(const std::vector<CaseRow>& rows) {
  std::string out = csv_header() + "\n";
  for (const auto& r : rows) {
    out += r.method + "," + r.case_id;
    for (double v : metric_values(r)) out += "," + format_number(v);
    out += "\n";
  }
  return out;
}

nlohmann::json aggregate(const std::vector<CaseRow>& rows) {
  std::map<std::string, std::vector<const CaseRow*>> by_method;
  std::vector<std::string> order;
  for (const auto& r : rows) {
    if (!by_method.count(r.method)) order.push_back(r.method);
    by_method[r.method].push_back(&r);
  }
  nlohmann::json out = nlohmann::json::object();
  const auto& cols = metric_columns();
  for (const auto& method : order) {
    const auto& rs = by_method[method];
    nlohmann::json m;
    m["cases"] = rs.size();
    nlohmann::json means, nans;
    for (std::size_t c = 0; c < cols.size(); ++c) {
      double sum = 0.0;
      std::size_t n = 0, bad = 0;
      for (const auto* r : rs) {
        const double v = metric_values(*r)[c];
        if (std::isfinite(v)) {
          sum += v;
          ++n;
        } else {
          ++bad;
        }
      }
      means[cols[c]] = n ? nlohmann::json(sum / static_cast<double>(n)) : nlohmann::json(nullptr);
      nans[cols[c]] = bad;
    }
    m["mean"] = means;
    m["undefined"] = nans;
    out[method] = m;
  }
  return out;
}

}  // namespace wavecast::report
