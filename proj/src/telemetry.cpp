#include "shapeservo/telemetry.hpp"

#include <cstdio>
#include <fstream>

namespace shapeservo {

ConvergenceMetrics convergence_metrics(const std::vector<TelemetryRecord>& records,
                                       double epsilon_e, double hold_s) {
    ConvergenceMetrics cm;
    if (records.empty()) return cm;

    const std::size_t count = records.size();
    const double t_end = records.back().t_s;

    // First index whose threshold-hold lasts hold_s within the record.
    for (std::size_t i = 0; i < count; ++i) {
        if (records[i].norm_e > epsilon_e) continue;
        if (records[i].t_s + hold_s > t_end + 1e-9) break;  // not enough data left
        bool held = true;
        for (std::size_t j = i; j < count && records[j].t_s <= records[i].t_s + hold_s + 1e-9;
             ++j) {
            if (records[j].norm_e > epsilon_e) {
                held = false;
                break;
            }
        }
        if (held) {
            cm.converged = true;
            cm.never_converged = false;
            cm.time_to_threshold_s = records[i].t_s;
            break;
        }
    }

    double sum_e = 0.0, sum_xt = 0.0, sum_xtd = 0.0;
    int tail = 0;
    for (const auto& r : records) {
        cm.peak_norm_xtildedot = std::max(cm.peak_norm_xtildedot, r.norm_xtildedot);
        if (r.t_s >= t_end - 1.0 - 1e-9) {
            sum_e += r.norm_e;
            sum_xt += r.norm_xtilde;
            sum_xtd += r.norm_xtildedot;
            ++tail;
        }
    }
    if (tail > 0) {
        cm.final_norm_e = sum_e / tail;
        cm.final_norm_xtilde = sum_xt / tail;
        cm.final_norm_xtildedot = sum_xtd / tail;
    }
    return cm;
}

namespace {

void append_double(std::string& out, double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out += buf;
}

void append_vector(std::string& out, const Eigen::VectorXd& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        out += ',';
        append_double(out, v(i));
    }
}

}  // namespace

std::string telemetry_to_csv(const std::vector<TelemetryRecord>& records, int n, int m) {
    std::string out = "t";
    auto columns = [&out](const char* base, int count) {
        for (int i = 0; i < count; ++i) {
            out += ',';
            out += base;
            out += std::to_string(i);
        }
    };
    columns("q", n);
    columns("qdot", n);
    columns("x", m);
    columns("xhat", m);
    columns("e", m);
    out += ",norm_e,norm_xtilde,norm_xtildedot,rank,min_sv,clamped,disturbance\n";

    for (const auto& r : records) {
        append_double(out, r.t_s);
        append_vector(out, r.q);
        append_vector(out, r.qdot);
        append_vector(out, r.x);
        append_vector(out, r.x_hat);
        append_vector(out, r.e);
        out += ',';
        append_double(out, r.norm_e);
        out += ',';
        append_double(out, r.norm_xtilde);
        out += ',';
        append_double(out, r.norm_xtildedot);
        out += ',' + std::to_string(r.jacobian_rank);
        out += ',';
        append_double(out, r.min_singular_value);
        out += ',';
        out += r.velocity_clamped ? '1' : '0';
        out += ',';
        out += r.disturbance_active ? '1' : '0';
        out += '\n';
    }
    return out;
}

void write_telemetry_csv(const std::vector<TelemetryRecord>& records, int n, int m,
                         const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for write: " + path);
    f << telemetry_to_csv(records, n, m);
    if (!f) throw IoError("write failed: " + path);
}

std::string render_svg_plot(const std::string& title, const std::vector<double>& t,
                            const std::vector<double>& values) {
    if (t.size() != values.size()) {
        throw DimensionMismatch("time and value series must match");
    }
    double xmin = 0.0, xmax = 1.0, ymin = 0.0, ymax = 1.0;
    if (!t.empty()) {
        xmin = xmax = t.front();
        ymin = ymax = values.front();
        for (std::size_t i = 0; i < t.size(); ++i) {
            xmin = std::min(xmin, t[i]);
            xmax = std::max(xmax, t[i]);
            ymin = std::min(ymin, values[i]);
            ymax = std::max(ymax, values[i]);
        }
    }
    // Axis ranges covering the data with a 5% margin.
    const double xpad = (xmax - xmin) > 0 ? 0.05 * (xmax - xmin) : 1.0;
    const double ypad = (ymax - ymin) > 0 ? 0.05 * (ymax - ymin) : 1.0;
    xmin -= xpad;
    xmax += xpad;
    ymin -= ypad;
    ymax += ypad;

    const int width = 640, height = 360, margin = 50;
    auto px = [&](double x) {
        return margin + (x - xmin) / (xmax - xmin) * (width - 2 * margin);
    };
    auto py = [&](double y) {
        return height - margin - (y - ymin) / (ymax - ymin) * (height - 2 * margin);
    };

    char buf[256];
    std::string svg;
    std::snprintf(buf, sizeof(buf),
                  "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%d\" "
                  "height=\"%d\" data-xmin=\"%.17g\" data-xmax=\"%.17g\" "
                  "data-ymin=\"%.17g\" data-ymax=\"%.17g\">\n",
                  width, height, xmin, xmax, ymin, ymax);
    svg += buf;
    svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    std::snprintf(buf, sizeof(buf),
                  "<text x=\"%d\" y=\"24\" font-family=\"sans-serif\" "
                  "font-size=\"14\">%s</text>\n",
                  margin, title.c_str());
    svg += buf;
    std::snprintf(buf, sizeof(buf),
                  "<line x1=\"%d\" y1=\"%d\" x2=\"%d\" y2=\"%d\" stroke=\"black\"/>\n",
                  margin, height - margin, width - margin, height - margin);
    svg += buf;
    std::snprintf(buf, sizeof(buf),
                  "<line x1=\"%d\" y1=\"%d\" x2=\"%d\" y2=\"%d\" stroke=\"black\"/>\n",
                  margin, margin, margin, height - margin);
    svg += buf;

    if (!t.empty()) {
        svg += "<polyline fill=\"none\" stroke=\"#1f6fb2\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < t.size(); ++i) {
            std::snprintf(buf, sizeof(buf), "%.6g,%.6g ", px(t[i]), py(values[i]));
            svg += buf;
        }
        svg += "\"/>\n";
    }
    svg += "</svg>\n";
    return svg;
}

void write_svg_plot(const std::string& title, const std::vector<double>& t,
                    const std::vector<double>& values, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for write: " + path);
    f << render_svg_plot(title, t, values);
    if (!f) throw IoError("write failed: " + path);
}

}  // namespace shapeservo
