#pragma once

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "pdcf/dataset.hpp"
#include "pdcf/image_io.hpp"
#include "pdcf/metrics.hpp"
#include "pdcf/network.hpp"

namespace pdcf {

/// Runs the model over every image in `in_dir` and writes the enhanced
/// results as PNG into `out_dir` (stem preserved, extension becomes .png).
/// size == 0 keeps each image at its native resolution.
inline void enhance_dir(const PdcfNet& net, const std::string& in_dir,
                        const std::string& out_dir, int size = 0,
                        std::ostream* log = nullptr) {
    namespace fs = std::filesystem;
    const auto images = list_images(in_dir);
    if (images.empty()) throw DataError(in_dir + ": no images found");
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw DataError("cannot create " + out_dir + ": " + ec.message());

    for (const auto& [stem, path] : images) {
        bool dropped = false;
        Tensor x = io::to_tensor(io::load_image(path, &dropped));
        if (dropped && log) *log << "warning: " << path << ": alpha channel dropped\n";
        if (size > 0) x = io::resize_bilinear(x, size, size);
        const Tensor y = net.forward(nullptr, x);
        const std::string out_path = (fs::path(out_dir) / (stem + ".png")).string();
        io::save_png(out_path, io::from_tensor(y));
        if (log) *log << path << " -> " << out_path << "\n";
    }
}

struct MetricReport {
    struct Row {
        std::string id;
        std::vector<double> values;
    };
    std::vector<std::string> columns;
    std::vector<Row> rows;
    std::vector<double> means;
    std::vector<double> stds;
};

namespace report_detail {

inline const std::vector<std::string> kNoReferenceColumns = {"uicm", "uism", "uiconm",
                                                             "uiqm", "uciqe"};
inline const std::vector<std::string> kFullReferenceColumns = {
    "mse", "psnr", "ssim_x100", "uicm", "uism", "uiconm", "uiqm", "uciqe"};

inline std::string format_value(double v, const char* fmt) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    std::snprintf(buf, sizeof(buf), fmt, v);
    return buf;
}

inline void finalize_summary(MetricReport& report) {
    report.means.assign(report.columns.size(), 0.0);
    report.stds.assign(report.columns.size(), 0.0);
    for (std::size_t c = 0; c < report.columns.size(); ++c) {
        std::vector<double> col;
        col.reserve(report.rows.size());
        for (const auto& row : report.rows) col.push_back(row.values[c]);
        report.means[c] = metrics::stable_mean(col);
        report.stds[c] = metrics::population_std(col, report.means[c]);
    }
}

}  // namespace report_detail

/// Scores a prediction directory. With a reference directory the report
/// carries MSE, PSNR, SSIM (x100) plus the no-reference set computed on the
/// predictions; without one only the no-reference set. Rows are matched by
/// filename stem and ordered lexicographically; the summary is mean and
/// population standard deviation per column.
inline MetricReport evaluate_dirs(const std::string& pred_dir, const std::string& ref_dir,
                                  std::ostream* warn = nullptr) {
    using report_detail::kFullReferenceColumns;
    using report_detail::kNoReferenceColumns;
    const bool full_reference = !ref_dir.empty();

    MetricReport report;
    report.columns = full_reference ? kFullReferenceColumns : kNoReferenceColumns;

    const auto preds = list_images(pred_dir);
    if (preds.empty()) throw DataError(pred_dir + ": no images found");
    std::map<std::string, std::string> refs;
    if (full_reference) {
        for (const auto& [stem, path] : list_images(ref_dir)) refs[stem] = path;
    }

    for (const auto& [stem, path] : preds) {
        const Tensor pred = io::to_tensor(io::load_image(path));
        MetricReport::Row row;
        row.id = stem;
        if (full_reference) {
            auto it = refs.find(stem);
            if (it == refs.end()) {
                if (warn) *warn << "warning: " << path << " has no matching reference, skipped\n";
                continue;
            }
            const Tensor ref = io::to_tensor(io::load_image(it->second));
            if (ref.shape() != pred.shape()) {
                throw DataError("evaluate: " + stem + " prediction " + pred.shape().str() +
                                " does not match reference " + ref.shape().str());
            }
            refs.erase(it);
            const auto mp = metrics::mse_psnr(pred, ref);
            row.values.push_back(mp.mse);
            row.values.push_back(mp.psnr);
            row.values.push_back(100.0 * metrics::ssim_index(pred, ref));
        }
        row.values.push_back(metrics::uicm(pred));
        row.values.push_back(metrics::uism(pred));
        row.values.push_back(metrics::uiconm(pred));
        row.values.push_back(metrics::uiqm(pred));
        row.values.push_back(metrics::uciqe(pred));
        report.rows.push_back(std::move(row));
    }
    if (full_reference && warn) {
        for (const auto& [stem, path] : refs) {
            *warn << "warning: " << path << " has no matching prediction, skipped\n";
        }
    }
    if (report.rows.empty()) {
        throw DataError("evaluate: no matching prediction/reference pairs");
    }
    report_detail::finalize_summary(report);
    return report;
}

/// CSV report: header, one row per image, then a `summary` row with
/// mean±std cells in the two-decimal convention.
inline void write_report_csv(const MetricReport& report, const std::string& path) {
    using report_detail::format_value;
    std::string out = "id";
    for (const auto& c : report.columns) out += "," + c;
    out += "\n";
    for (const auto& row : report.rows) {
        out += row.id;
        for (double v : row.values) out += "," + format_value(v, "%.6f");
        out += "\n";
    }
    out += "summary";
    for (std::size_t c = 0; c < report.columns.size(); ++c) {
        out += "," + format_value(report.means[c], "%.2f") + "±" +
               format_value(report.stds[c], "%.2f");
    }
    out += "\n";
    io::write_file_atomic(path, out.data(), out.size());
}

/// JSON report with full-precision values; non-finite values are encoded as
/// the strings "inf", "-inf" and "nan".
inline void write_report_json(const MetricReport& report, const std::string& path) {
    using ordered_json = nlohmann::ordered_json;
    auto encode = [](double v) -> ordered_json {
        if (std::isnan(v)) return "nan";
        if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
        return v;
    };

    ordered_json j;
    j["columns"] = report.columns;
    j["images"] = ordered_json::array();
    for (const auto& row : report.rows) {
        ordered_json r;
        r["id"] = row.id;
        for (std::size_t c = 0; c < report.columns.size(); ++c) {
            r[report.columns[c]] = encode(row.values[c]);
        }
        j["images"].push_back(r);
    }
    j["summary"] = ordered_json::object();
    for (std::size_t c = 0; c < report.columns.size(); ++c) {
        j["summary"][report.columns[c]] = {{"mean", encode(report.means[c])},
                                           {"std", encode(report.stds[c])}};
    }
    const std::string text = j.dump(2) + "\n";
    io::write_file_atomic(path, text.data(), text.size());
}

/// Writes BASE.csv and BASE.json; a trailing .csv or .json on `base` is
/// stripped first.
inline void write_report(const MetricReport& report, const std::string& base) {
    std::string stem = base;
    for (const char* ext : {".csv", ".json"}) {
        if (stem.size() > std::strlen(ext) &&
            stem.compare(stem.size() - std::strlen(ext), std::string::npos, ext) == 0) {
            stem.resize(stem.size() - std::strlen(ext));
            break;
        }
    }
    write_report_csv(report, stem + ".csv");
    write_report_json(report, stem + ".json");
}

}  // namespace pdcf
