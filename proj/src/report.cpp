#include "stcert/report.hpp"

#include "stcert/error.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace stcert
{

namespace fs = std::filesystem;
using nlohmann::json;

namespace
{

std::string fmt(double v, int digits = 6)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::string escape_xml(const std::string& s)
{
    std::string out;
    for (char c : s)
    {
        switch (c)
        {
        case '&':
            out += "&amp;";
            break;
        case '<':
            out += "&lt;";
            break;
        case '>':
            out += "&gt;";
            break;
        case '"':
            out += "&quot;";
            break;
        default:
            out += c;
        }
    }
    return out;
}

std::string csv_field(const std::string& s)
{
    if (s.find_first_of(",\"\n") == std::string::npos)
        return s;
    std::string out = "\"";
    for (char c : s)
    {
        if (c == '"')
            out += '"';
        out += c;
    }
    return out + "\"";
}

std::string level_str(const std::optional<int>& level)
{
    return level ? std::to_string(*level) : std::string();
}

// Okabe-Ito palette.
const char* colour(std::size_t i)
{
    static const char* palette[] = {"#0072B2", "#E69F00", "#009E73", "#D55E00", "#CC79A7", "#56B4E9", "#F0E442",
                                    "#000000"};
    return palette[i % (sizeof palette / sizeof *palette)];
}

constexpr int kWidth = 640;
constexpr int kHeight = 400;
constexpr int kLeft = 60;
constexpr int kRight = 150;
constexpr int kTop = 40;
constexpr int kBottom = 60;

void svg_frame(std::ostringstream& o, const std::string& title, double ymax)
{
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\">\n";
    o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    o << "<text x=\"" << kWidth / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">"
      << escape_xml(title) << "</text>\n";
    const int plot_h = kHeight - kTop - kBottom;
    for (int t = 0; t <= 4; ++t)
    {
        const double v = ymax * t / 4.0;
        const double y = kTop + plot_h - plot_h * t / 4.0;
        o << "<line x1=\"" << kLeft << "\" y1=\"" << fmt(y, 2) << "\" x2=\"" << kWidth - kRight << "\" y2=\""
          << fmt(y, 2) << "\" stroke=\"#dddddd\"/>\n";
        o << "<text x=\"" << kLeft - 6 << "\" y=\"" << fmt(y + 4, 2)
          << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << fmt(v, 2) << "</text>\n";
    }
    o << "<line x1=\"" << kLeft << "\" y1=\"" << kTop + plot_h << "\" x2=\"" << kWidth - kRight << "\" y2=\""
      << kTop + plot_h << "\" stroke=\"black\"/>\n";
    o << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\"" << kTop + plot_h
      << "\" stroke=\"black\"/>\n";
}

void svg_legend(std::ostringstream& o, const std::vector<Series>& series)
{
    for (std::size_t s = 0; s < series.size(); ++s)
    {
        const int y = kTop + 10 + static_cast<int>(s) * 18;
        o << "<rect x=\"" << kWidth - kRight + 12 << "\" y=\"" << y - 9 << "\" width=\"10\" height=\"10\" fill=\""
          << colour(s) << "\"/>\n";
        o << "<text x=\"" << kWidth - kRight + 28 << "\" y=\"" << y
          << "\" font-family=\"sans-serif\" font-size=\"11\">" << escape_xml(series[s].name) << "</text>\n";
    }
}

double axis_max(const std::vector<Series>& series)
{
    double m = 0.0;
    for (const auto& s : series)
        for (double v : s.values)
            m = std::max(m, v);
    return m <= 1.0 ? 1.0 : m;
}

} // namespace

void write_text(const fs::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw ConfigError("cannot write " + path.string());
    out << text;
}

json eval_summary(const MetricsReport& report)
{
    json j = report.to_json();
    j["kind"] = "eval";
    return j;
}

json adv_summary(const AdvReport& report)
{
    json j = report.to_json();
    j["kind"] = "adv";
    return j;
}

json sweep_summary(const SweepResult& sweep)
{
    json points = json::array();
    for (const auto& p : sweep.points)
    {
        json jp = p.report.to_json();
        jp["label"] = p.label;
        points.push_back(std::move(jp));
    }
    json per_class = json::array();
    for (const auto& row : sweep.per_class)
    {
        json rates = json::array();
        for (const auto& r : row.rates)
            rates.push_back(r.value());
        per_class.push_back(
            {{"truth", row.truth}, {"mask_rate", row.mask_rate.value()}, {"rates", rates}, {"deltas", row.deltas}});
    }
    return {{"kind", "sweep"}, {"points", std::move(points)}, {"per_class", std::move(per_class)}};
}

json cross_summary(const CrossMatrix& matrix)
{
    json cells = json::array();
    for (std::size_t i = 0; i < matrix.cells.size(); ++i)
    {
        for (std::size_t j = 0; j < matrix.cells[i].size(); ++j)
        {
            const auto& cell = matrix.cells[i][j];
            json jc = cell.adversarial ? cell.adversarial->to_json() : cell.metrics->to_json();
            jc["row"] = i;
            jc["col"] = j;
            cells.push_back(std::move(jc));
        }
    }
    const bool adversarial = !matrix.cells.empty() && matrix.cells[0][0].adversarial.has_value();
    return {{"kind", "cross"}, {"adversarial", adversarial}, {"names", matrix.names}, {"cells", std::move(cells)}};
}

std::string eval_csv(const MetricsReport& r)
{
    std::ostringstream o;
    o << "dataset,first_backend,second_backend,mode,context_level,category,count,total,rate\n";
    for (auto c : kAllCategories)
    {
        o << csv_field(r.dataset) << ',' << csv_field(r.first_backend) << ',' << csv_field(r.second_backend) << ','
          << r.mode << ',' << level_str(r.context_level) << ',' << to_string(c) << ',' << r.count(c) << ','
          << r.total << ',' << fmt(r.rate(c).value()) << '\n';
    }
    return o.str();
}

std::string adv_csv(const AdvReport& r)
{
    std::ostringstream o;
    o << "first_backend,second_backend,rejected,certified,nobox,total,errors,detect_rate,certify_rate,nobox_rate,"
         "overall_success\n";
    o << csv_field(r.first_backend) << ',' << csv_field(r.second_backend) << ',' << r.rejected << ','
      << r.certified << ',' << r.nobox << ',' << r.total << ',' << r.errors << ',' << fmt(r.detect_rate().value())
      << ',' << fmt(r.certify_rate().value()) << ',' << fmt(r.nobox_rate().value()) << ','
      << fmt(r.overall_success().value()) << '\n';
    return o.str();
}

std::string sweep_csv(const SweepResult& sweep)
{
    std::ostringstream o;
    o << "label,mode,context_level,total";
    for (auto c : kAllCategories)
        o << ',' << to_string(c) << "_count," << to_string(c) << "_rate";
    o << '\n';
    for (const auto& p : sweep.points)
    {
        o << p.label << ',' << p.report.mode << ',' << level_str(p.level) << ',' << p.report.total;
        for (auto c : kAllCategories)
            o << ',' << p.report.count(c) << ',' << fmt(p.report.rate(c).value());
        o << '\n';
    }
    return o.str();
}

std::string per_class_csv(const SweepResult& sweep, const Taxonomy& taxonomy)
{
    std::ostringstream o;
    o << "truth,lemma,mask_rate";
    for (std::size_t k = 1; k < sweep.points.size(); ++k)
        o << ',' << sweep.points[k].label << "_rate," << sweep.points[k].label << "_delta";
    o << '\n';
    for (const auto& row : sweep.per_class)
    {
        o << row.truth << ',' << csv_field(taxonomy.contains(row.truth) ? taxonomy.entry(row.truth).lemma : "")
          << ',' << fmt(row.mask_rate.value());
        for (std::size_t k = 0; k < row.rates.size(); ++k)
            o << ',' << fmt(row.rates[k].value()) << ',' << fmt(row.deltas[k]);
        o << '\n';
    }
    return o.str();
}

std::string cross_csv(const CrossMatrix& m)
{
    std::ostringstream o;
    const bool adversarial = !m.cells.empty() && m.cells[0][0].adversarial.has_value();
    o << "first\\second";
    for (const auto& n : m.names)
        o << ',' << csv_field(n);
    o << '\n';
    for (std::size_t i = 0; i < m.cells.size(); ++i)
    {
        o << csv_field(m.names[i]);
        for (const auto& cell : m.cells[i])
        {
            const double v = adversarial ? cell.adversarial->overall_success().value()
                                         : cell.metrics->consistency().value();
            o << ',' << fmt(v);
        }
        o << '\n';
    }
    return o.str();
}

std::string bar_chart_svg(const std::string& title, const std::vector<std::string>& groups,
                          const std::vector<Series>& series)
{
    std::ostringstream o;
    const double ymax = axis_max(series);
    svg_frame(o, title, ymax);
    const int plot_w = kWidth - kLeft - kRight;
    const int plot_h = kHeight - kTop - kBottom;
    const double group_w = groups.empty() ? plot_w : static_cast<double>(plot_w) / groups.size();
    const double bar_w = series.empty() ? 0.0 : group_w * 0.8 / series.size();
    for (std::size_t g = 0; g < groups.size(); ++g)
    {
        const double gx = kLeft + g * group_w;
        for (std::size_t s = 0; s < series.size(); ++s)
        {
            const double v = g < series[s].values.size() ? series[s].values[g] : 0.0;
            const double h = plot_h * v / ymax;
            const double x = gx + group_w * 0.1 + s * bar_w;
            const double y = kTop + plot_h - h;
            o << "<rect x=\"" << fmt(x, 2) << "\" y=\"" << fmt(y, 2) << "\" width=\"" << fmt(bar_w, 2)
              << "\" height=\"" << fmt(h, 2) << "\" fill=\"" << colour(s) << "\"/>\n";
            o << "<text x=\"" << fmt(x + bar_w / 2, 2) << "\" y=\"" << fmt(y - 3, 2)
              << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"9\">" << fmt(v, 3) << "</text>\n";
        }
        o << "<text x=\"" << fmt(gx + group_w / 2, 2) << "\" y=\"" << kTop + plot_h + 16
          << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" << escape_xml(groups[g])
          << "</text>\n";
    }
    svg_legend(o, series);
    o << "</svg>\n";
    return o.str();
}

std::string line_chart_svg(const std::string& title, const std::vector<std::string>& x_labels,
                           const std::vector<Series>& series)
{
    std::ostringstream o;
    const double ymax = axis_max(series);
    svg_frame(o, title, ymax);
    const int plot_w = kWidth - kLeft - kRight;
    const int plot_h = kHeight - kTop - kBottom;
    const auto n = x_labels.size();
    auto px = [&](std::size_t i) { return n <= 1 ? kLeft + plot_w / 2.0 : kLeft + plot_w * (i + 0.5) / n; };
    auto py = [&](double v) { return kTop + plot_h - plot_h * v / ymax; };
    for (std::size_t i = 0; i < n; ++i)
    {
        o << "<text x=\"" << fmt(px(i), 2) << "\" y=\"" << kTop + plot_h + 16
          << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" << escape_xml(x_labels[i])
          << "</text>\n";
    }
    for (std::size_t s = 0; s < series.size(); ++s)
    {
        const auto& vals = series[s].values;
        o << "<polyline fill=\"none\" stroke=\"" << colour(s) << "\" stroke-width=\"2\" points=\"";
        for (std::size_t i = 0; i < vals.size() && i < n; ++i)
            o << (i ? " " : "") << fmt(px(i), 2) << ',' << fmt(py(vals[i]), 2);
        o << "\"/>\n";
        for (std::size_t i = 0; i < vals.size() && i < n; ++i)
        {
            o << "<circle cx=\"" << fmt(px(i), 2) << "\" cy=\"" << fmt(py(vals[i]), 2) << "\" r=\"3\" fill=\""
              << colour(s) << "\"/>\n";
            o << "<text x=\"" << fmt(px(i), 2) << "\" y=\"" << fmt(py(vals[i]) - 6, 2)
              << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"9\">" << fmt(vals[i], 3)
              << "</text>\n";
        }
    }
    svg_legend(o, series);
    o << "</svg>\n";
    return o.str();
}

std::vector<fs::path> render_report(const json& summary, const fs::path& out_dir)
{
    fs::create_directories(out_dir);
    std::vector<fs::path> written;
    auto emit = [&](const std::string& name, const std::string& svg) {
        write_text(out_dir / name, svg);
        written.push_back(name);
    };
    std::vector<std::string> categories;
    for (auto c : kAllCategories)
        categories.emplace_back(to_string(c));

    try
    {
        const auto kind = summary.at("kind").get<std::string>();
        if (kind == "eval")
        {
            Series s{summary.value("first_backend", std::string("rates")), {}};
            for (const auto& c : categories)
                s.values.push_back(summary.at("rates").at(c).get<double>());
            emit("categories.svg", bar_chart_svg("Category rates (" + summary.value("dataset", std::string()) + ")",
                                                 categories, {s}));
        }
        else if (kind == "adv")
        {
            Series s{"rate",
                     {summary.at("detect_rate").get<double>(), summary.at("certify_rate").get<double>(),
                      summary.at("nobox_rate").get<double>(), summary.at("overall_success").get<double>()}};
            emit("adversarial.svg",
                 bar_chart_svg("Adversarial outcomes", {"Rejected", "Certified", "NoBox", "Overall"}, {s}));
        }
        else if (kind == "sweep")
        {
            std::vector<std::string> labels;
            for (const auto& p : summary.at("points"))
                labels.push_back(p.at("label").get<std::string>());
            for (const auto& c : categories)
            {
                Series s{c, {}};
                for (const auto& p : summary.at("points"))
                    s.values.push_back(p.at("rates").at(c).get<double>());
                emit("sweep_" + c + ".svg", line_chart_svg(c + " rate vs context width", labels, {s}));
            }
        }
        else if (kind == "cross")
        {
            const auto names = summary.at("names").get<std::vector<std::string>>();
            const bool adversarial = summary.value("adversarial", false);
            const char* key = adversarial ? "overall_success" : "consistency_rate";
            std::vector<Series> series;
            for (const auto& second : names)
                series.push_back({"second: " + second, std::vector<double>(names.size(), 0.0)});
            for (const auto& cell : summary.at("cells"))
            {
                const auto row = cell.at("row").get<std::size_t>();
                const auto col = cell.at("col").get<std::size_t>();
                series.at(col).values.at(row) = cell.at(key).get<double>();
            }
            emit("cross.svg", bar_chart_svg(std::string(adversarial ? "Overall success" : "Consistency") +
                                                " by first classifier",
                                            names, series));
        }
        else
        {
            throw ConfigError("unknown summary kind \"" + kind + "\"");
        }
    }
    catch (const json::exception& e)
    {
        throw ConfigError(std::string("malformed summary: ") + e.what());
    }
    return written;
}

json summary_from_log(const std::vector<TrialRecord>& log)
{
    const bool adversarial = !log.empty() && log.front().adversarial;
    return adversarial ? adv_summary(adversarial_summary(log)) : eval_summary(summarize(log));
}

} // namespace stcert
