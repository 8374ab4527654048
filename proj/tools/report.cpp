#include "report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace rrisk::cli {

void Report::warn(const std::string& where, const std::string& message) {
    warnings.push_back({{"where", where}, {"message", message}});
}

json to_json(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "+inf" : "-inf";
    return v;
}

json to_json(const ExtReal& v) {
    if (v.is_pos_inf()) return "+inf";
    if (v.is_neg_inf()) return "-inf";
    return v.value();
}

json to_json(const std::vector<double>& v) {
    json a = json::array();
    for (double x : v) a.push_back(to_json(x));
    return a;
}

json to_json(const Witness& w) {
    json vectors = json::object(), scalars = json::object();
    for (const auto& [k, v] : w.vectors) vectors[k] = to_json(v);
    for (const auto& [k, v] : w.scalars) scalars[k] = to_json(v);
    return {{"probs", to_json(w.probs)}, {"vectors", vectors}, {"scalars", scalars}};
}

json to_json(const PropertyVerdict& v) {
    json j = {{"verdict", to_string(v.tag)}, {"trials", v.trials}, {"note", v.note}};
    if (v.is_counterexample()) j["witness"] = to_json(v.witness);
    return j;
}

ExtReal ext_from_json(const json& j) {
    if (j.is_number()) return ExtReal(j.get<double>());
    if (j.is_string()) {
        auto s = j.get<std::string>();
        if (s == "+inf" || s == "inf") return ExtReal::pos_inf();
        if (s == "-inf") return ExtReal::neg_inf();
    }
    throw std::invalid_argument("expected a number or \"+inf\"/\"-inf\"");
}

namespace {

double real_from_json(const json& j) {
    auto v = ext_from_json(j);
    return v.to_double();
}

std::vector<double> reals_from_json(const json& j) {
    if (!j.is_array()) throw std::invalid_argument("expected an array");
    std::vector<double> v;
    for (const auto& e : j) v.push_back(real_from_json(e));
    return v;
}

std::string number_text(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write(std::ostringstream& os, const json& j, int indent) {
    const std::string pad(static_cast<std::size_t>(indent + 2), ' '), close(static_cast<std::size_t>(indent), ' ');
    switch (j.type()) {
        case json::value_t::object: {
            if (j.empty()) {
                os << "{}";
                return;
            }
            os << "{\n";
            bool first = true;
            for (auto it = j.begin(); it != j.end(); ++it) {  // std::map: keys come sorted
                if (!first) os << ",\n";
                first = false;
                os << pad << json(it.key()).dump() << ": ";
                write(os, it.value(), indent + 2);
            }
            os << "\n" << close << "}";
            return;
        }
        case json::value_t::array: {
            if (j.empty()) {
                os << "[]";
                return;
            }
            bool scalars = std::all_of(j.begin(), j.end(), [](const json& e) { return e.is_primitive(); });
            if (scalars) {
                os << "[";
                for (std::size_t i = 0; i < j.size(); ++i) {
                    if (i) os << ", ";
                    write(os, j[i], indent);
                }
                os << "]";
                return;
            }
            os << "[\n";
            for (std::size_t i = 0; i < j.size(); ++i) {
                if (i) os << ",\n";
                os << pad;
                write(os, j[i], indent + 2);
            }
            os << "\n" << close << "]";
            return;
        }
        case json::value_t::number_float: {
            double v = j.get<double>();
            if (std::isfinite(v))
                os << number_text(v);
            else
                os << json(v > 0 ? "+inf" : "-inf").dump();
            return;
        }
        default: os << j.dump(); return;
    }
}

std::string cell(const json& j, bool full_precision) {
    if (j.is_string()) return j.get<std::string>();
    if (j.is_number_float()) {
        if (full_precision) return number_text(j.get<double>());
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.10g", j.get<double>());
        return buf;
    }
    if (j.is_null()) return "";
    if (j.is_array()) {
        std::string s = "[";
        for (std::size_t i = 0; i < j.size(); ++i) s += (i ? " " : "") + cell(j[i], full_precision);
        return s + "]";
    }
    return j.dump();
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

}  // namespace

Witness witness_from_json(const json& j) {
    Witness w;
    if (!j.is_object()) throw std::invalid_argument("witness: expected an object");
    if (j.contains("probs")) w.probs = reals_from_json(j["probs"]);
    if (j.contains("vectors"))
        for (auto it = j["vectors"].begin(); it != j["vectors"].end(); ++it)
            w.vectors[it.key()] = reals_from_json(it.value());
    if (j.contains("scalars"))
        for (auto it = j["scalars"].begin(); it != j["scalars"].end(); ++it)
            w.scalars[it.key()] = real_from_json(it.value());
    return w;
}

std::string dump(const json& j) {
    std::ostringstream os;
    write(os, j, 0);
    os << "\n";
    return os.str();
}

std::string render_json(const Report& r) {
    json j = r.body;
    j["command"] = r.command;
    j["warnings"] = r.warnings;
    j["counterexample"] = r.counterexample;
    return dump(j);
}

std::string render_csv(const Report& r) {
    std::string out;
    for (std::size_t i = 0; i < r.columns.size(); ++i) out += (i ? "," : "") + csv_field(r.columns[i]);
    out += "\n";
    for (const auto& row : r.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + csv_field(cell(row[i], true));
        out += "\n";
    }
    return out;
}

std::string render_table(const Report& r) {
    std::vector<std::vector<std::string>> cells;
    cells.push_back(r.columns);
    for (const auto& row : r.rows) {
        std::vector<std::string> c;
        for (const auto& v : row) c.push_back(cell(v, false));
        cells.push_back(std::move(c));
    }
    std::vector<std::size_t> width(r.columns.size(), 0);
    for (const auto& row : cells)
        for (std::size_t i = 0; i < row.size() && i < width.size(); ++i) width[i] = std::max(width[i], row[i].size());

    std::ostringstream os;
    os << "rrisk " << r.command << "\n";
    for (std::size_t k = 0; k < cells.size(); ++k) {
        for (std::size_t i = 0; i < cells[k].size(); ++i) {
            if (i) os << "  ";
            os << cells[k][i];
            if (i + 1 < cells[k].size()) os << std::string(width[i] - cells[k][i].size(), ' ');
        }
        os << "\n";
        if (k == 0) {
            std::size_t total = 0;
            for (auto w : width) total += w + 2;
            os << std::string(total > 2 ? total - 2 : 0, '-') << "\n";
        }
    }
    for (const auto& w : r.warnings)
        os << "warning [" << w["where"].get<std::string>() << "]: " << w["message"].get<std::string>() << "\n";
    if (r.counterexample) os << "counterexample found (see the JSON report for the witness)\n";
    return os.str();
}

}  // namespace rrisk::cli
