#include "e2e/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

namespace e2e {

using nlohmann::json;

std::string format_double(double v) {
    char buf[64];
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

namespace {

std::ofstream open_out(const std::string& path, const char* what) {
    std::ofstream out(path);
    if (!out) fail_io(std::string(what) + ": cannot open " + path);
    return out;
}

} // namespace

void write_train_log_csv(const std::string& path, const TrainLog& log) {
    std::ofstream out = open_out(path, "write_train_log_csv");
    out << "iteration,phase,loss\n";
    for (const auto& s : log.steps) {
        const char* phase = s.phase == 'r'   ? "rx"
                            : s.phase == 't' ? "tx"
                            : s.phase == 'j' ? "joint"
                                             : "spsa";
        out << s.step << ',' << phase << ',' << format_double(s.loss) << '\n';
    }
    if (!out) fail_io("write_train_log_csv: write failed for " + path);
}

void write_bler_csv(const std::string& path, const std::vector<BlerPoint>& pts) {
    std::ofstream out = open_out(path, "write_bler_csv");
    out << "snr_db,bler,blocks,errors,ci95\n";
    for (const auto& p : pts)
        out << format_double(p.snr_db) << ',' << format_double(p.rate) << ',' << p.blocks << ','
            << p.errors << ',' << format_double(p.ci95) << '\n';
    if (!out) fail_io("write_bler_csv: write failed for " + path);
}

void write_theorem1_csv(const std::string& path, const std::vector<Theorem1Row>& rows) {
    std::ofstream out = open_out(path, "write_theorem1_csv");
    out << "sigma,cosine,norm_ratio,cosine_se\n";
    for (const auto& r : rows)
        out << format_double(r.sigma) << ',' << format_double(r.cosine) << ','
            << format_double(r.norm_ratio) << ',' << format_double(r.cosine_se) << '\n';
    if (!out) fail_io("write_theorem1_csv: write failed for " + path);
}

void write_variance_csv(const std::string& path, const std::vector<VarianceRecord>& recs) {
    std::ofstream out = open_out(path, "write_variance_csv");
    out << "m,params,var_spsa,var_score\n";
    for (const auto& r : recs)
        out << r.m << ',' << r.params << ',' << format_double(r.var_spsa) << ','
            << format_double(r.var_score) << '\n';
    if (!out) fail_io("write_variance_csv: write failed for " + path);
}

void write_feedback_csv(const std::string& path, const std::vector<FeedbackRow>& rows) {
    std::ofstream out = open_out(path, "write_feedback_csv");
    out << "snr_fb_db,bler,blocks,errors,ci95\n";
    for (const auto& r : rows)
        out << format_double(r.snr_fb_db) << ',' << format_double(r.point.rate) << ','
            << r.point.blocks << ',' << r.point.errors << ',' << format_double(r.point.ci95)
            << '\n';
    if (!out) fail_io("write_feedback_csv: write failed for " + path);
}

namespace {

json mat_to_json(const Mat& m) {
    json j;
    j["rows"] = m.rows;
    j["cols"] = m.cols;
    j["v"] = m.v;
    return j;
}

Mat mat_from_json(const json& j) {
    Mat m(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>());
    m.v = j.at("v").get<std::vector<double>>();
    if (m.v.size() != m.rows * m.cols) fail_io("model file: matrix size mismatch");
    return m;
}

json mlp_to_json(const Mlp& net) {
    json layers = json::array();
    for (const auto& l : net.layers) {
        json lj;
        lj["act"] = act_name(l.act);
        lj["W"] = mat_to_json(l.W);
        lj["b"] = mat_to_json(l.b);
        layers.push_back(lj);
    }
    return layers;
}

Mlp mlp_from_json(const json& j) {
    Mlp net;
    for (const auto& lj : j) {
        Layer l;
        l.act = act_from_name(lj.at("act").get<std::string>());
        l.W = mat_from_json(lj.at("W"));
        l.b = mat_from_json(lj.at("b"));
        net.layers.push_back(std::move(l));
    }
    return net;
}

} // namespace

void save_system(const std::string& path, const CommSystem& sys) {
    json j;
    j["M"] = sys.arch.M;
    j["N"] = sys.arch.N;
    j["pilot"] = sys.arch.pilot;
    j["fiber_arch"] = sys.arch.fiber_arch;
    j["rx_style"] = sys.rx.transformer ? "transformer" : "discriminative";
    j["norm_target"] = sys.tx.norm_target;
    j["rx_input_scale"] = sys.rx.input_scale;
    j["tx"] = mlp_to_json(sys.tx.net);
    j["rx"] = mlp_to_json(sys.rx.discriminative);
    if (sys.rx.transformer) j["rx_transformer"] = mlp_to_json(*sys.rx.transformer);
    std::ofstream out = open_out(path, "save_system");
    out << j.dump(1) << '\n';
    if (!out) fail_io("save_system: write failed for " + path);
}

CommSystem load_system(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail_io("load_system: cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        fail_io("load_system: " + path + ": " + e.what());
    }
    try {
        CommSystem sys;
        sys.arch.M = j.at("M").get<int>();
        sys.arch.N = j.at("N").get<int>();
        sys.arch.pilot = j.at("pilot").get<bool>();
        sys.arch.fiber_arch = j.at("fiber_arch").get<bool>();
        sys.arch.rx_style = j.at("rx_style").get<std::string>() == "transformer"
                                ? RxStyle::transformer
                                : RxStyle::discriminative;
        sys.tx.M = sys.arch.M;
        sys.tx.N = sys.arch.N;
        sys.tx.norm_target = j.at("norm_target").get<double>();
        sys.tx.fiber_arch = sys.arch.fiber_arch;
        sys.tx.net = mlp_from_json(j.at("tx"));
        sys.rx.M = sys.arch.M;
        sys.rx.N = sys.arch.N;
        sys.rx.input_scale = j.value("rx_input_scale", 1.0);
        sys.rx.discriminative = mlp_from_json(j.at("rx"));
        if (j.contains("rx_transformer")) sys.rx.transformer = mlp_from_json(j.at("rx_transformer"));
        return sys;
    } catch (const json::exception& e) {
        fail_io("load_system: " + path + ": " + e.what());
    }
}

} // namespace e2e
