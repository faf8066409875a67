#pragma once

#include <cerrno>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "mmi/error.hpp"
#include "mmi/linalg.hpp"
#include "mmi/model.hpp"
#include "mmi/pipeline.hpp"

namespace mmi {

// File-system failures are environment errors; everything else the readers
// raise is a problem with the content.
class IoError : public Error {
public:
    explicit IoError(const std::string& detail) : Error("io-failure", detail) {}
};

inline constexpr int kModelFormatVersion = 1;

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << text;
    out.flush();
    if (!out) throw IoError("write to '" + path + "' failed");
}

// ---------------------------------------------------------------------------
// Dataset CSV: header x1,...,xd,y then one sample per row.

inline std::string dataset_to_csv(const Dataset& data) {
    std::string out;
    for (Eigen::Index j = 0; j < data.X.cols(); ++j) out += "x" + std::to_string(j + 1) + ",";
    out += "y\n";
    for (Eigen::Index i = 0; i < data.X.rows(); ++i) {
        for (Eigen::Index j = 0; j < data.X.cols(); ++j) out += format_double(data.X(i, j)) + ",";
        out += format_double(data.Y(i)) + "\n";
    }
    return out;
}

inline std::pair<Matrix, Vector> dataset_from_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    auto split = [](const std::string& s) {
        std::vector<std::string> cells;
        std::string cell;
        std::istringstream ss(s);
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (!s.empty() && s.back() == ',') cells.emplace_back();
        return cells;
    };
    auto strip = [](std::string s) {
        while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.pop_back();
        return s;
    };

    if (!std::getline(in, line)) throw Error("malformed-csv", "line 1: missing header");
    ++lineno;
    const std::vector<std::string> header = split(strip(line));
    if (header.size() < 2 || header.back() != "y") throw Error("malformed-csv", "line 1: header must be x1,...,xd,y");
    const std::size_t d = header.size() - 1;
    for (std::size_t j = 0; j < d; ++j)
        if (header[j] != "x" + std::to_string(j + 1))
            throw Error("malformed-csv", "line 1: expected column 'x" + std::to_string(j + 1) + "'");

    std::vector<double> values;
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        ++lineno;
        line = strip(line);
        if (line.empty()) continue;
        const std::vector<std::string> cells = split(line);
        if (cells.size() != d + 1)
            throw Error("malformed-csv", "line " + std::to_string(lineno) + ": expected " + std::to_string(d + 1) +
                                             " fields, found " + std::to_string(cells.size()));
        for (const std::string& cell : cells) {
            errno = 0;
            char* end = nullptr;
            const double v = std::strtod(cell.c_str(), &end);
            if (cell.empty() || end != cell.c_str() + cell.size() || errno == ERANGE || !std::isfinite(v))
                throw Error("malformed-csv", "line " + std::to_string(lineno) + ": bad number '" + cell + "'");
            values.push_back(v);
        }
        ++rows;
    }
    Matrix x(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(d));
    Vector y(static_cast<Eigen::Index>(rows));
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < d; ++j)
            x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = values[i * (d + 1) + j];
        y(static_cast<Eigen::Index>(i)) = values[i * (d + 1) + d];
    }
    return {std::move(x), std::move(y)};
}

// ---------------------------------------------------------------------------
// Metadata sidecar: the constants and the seed that regenerate the ground truth.

struct DatasetMetadata {
    ModelConstants constants;
    std::uint64_t seed = 0;
    std::size_t n = 0;
};

inline nlohmann::ordered_json constants_to_json(const ModelConstants& c) {
    nlohmann::ordered_json j;
    j["d"] = c.d;
    j["k"] = c.k;
    j["sStar"] = c.sStar;
    j["r"] = c.r;
    j["C"] = c.C;
    j["b"] = c.b;
    j["eta"] = c.eta;
    j["theta"] = c.theta;
    j["rhoZero"] = c.rhoZero;
    j["pStar"] = c.pStar;
    return j;
}

namespace detail {

template <class T>
T json_field(const nlohmann::json& j, const char* key, const char* what) {
    if (!j.contains(key)) throw Error("missing-field", std::string(what) + " is missing field '" + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw Error("invalid-field", std::string(what) + " field '" + key + "' has the wrong type");
    }
}

inline nlohmann::json parse_json(const std::string& text, const char* what) {
    try {
        return nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error("malformed-json", std::string(what) + " is not valid JSON: " + e.what());
    }
}

}  // namespace detail

inline ModelConstants constants_from_json(const nlohmann::json& j, const char* what) {
    ModelConstants c;
    c.d = detail::json_field<std::size_t>(j, "d", what);
    c.k = detail::json_field<std::size_t>(j, "k", what);
    c.sStar = detail::json_field<std::size_t>(j, "sStar", what);
    c.r = detail::json_field<double>(j, "r", what);
    c.C = detail::json_field<double>(j, "C", what);
    c.b = detail::json_field<double>(j, "b", what);
    c.eta = detail::json_field<double>(j, "eta", what);
    if (j.contains("theta")) c.theta = detail::json_field<double>(j, "theta", what);
    if (j.contains("rhoZero")) c.rhoZero = detail::json_field<double>(j, "rhoZero", what);
    if (j.contains("pStar")) c.pStar = detail::json_field<double>(j, "pStar", what);
    return c;
}

inline std::string metadata_to_json(const DatasetMetadata& meta) {
    nlohmann::ordered_json j = constants_to_json(meta.constants);
    j["seed"] = meta.seed;
    j["n"] = meta.n;
    return j.dump(2) + "\n";
}

inline DatasetMetadata metadata_from_json(const std::string& text) {
    const nlohmann::json j = detail::parse_json(text, "metadata");
    DatasetMetadata meta;
    meta.constants = constants_from_json(j, "metadata");
    meta.seed = detail::json_field<std::uint64_t>(j, "seed", "metadata");
    if (j.contains("n")) meta.n = detail::json_field<std::size_t>(j, "n", "metadata");
    return meta;
}

// ---------------------------------------------------------------------------
// Model file.

struct ModelFile {
    FitResult fit;
    ModelConstants constants;
    std::uint64_t dataSeed = 0;  // seed of the ground truth the data came from
    std::uint64_t netSeed = 0;
    std::size_t N0 = 0;
};

inline std::string model_to_json(const ModelFile& m) {
    const FitResult& f = m.fit;
    nlohmann::ordered_json j;
    j["version"] = kModelFormatVersion;
    j["mode"] = to_string(f.mode);
    j["d"] = f.Qn.rows();
    j["k"] = f.Qn.cols();
    std::vector<double> qn, rbar;
    for (Eigen::Index r = 0; r < f.Qn.rows(); ++r)
        for (Eigen::Index c = 0; c < f.Qn.cols(); ++c) qn.push_back(f.Qn(r, c));
    for (Eigen::Index r = 0; r < f.Rbar.rows(); ++r)
        for (Eigen::Index c = 0; c < f.Rbar.cols(); ++c) rbar.push_back(f.Rbar(r, c));
    j["Qn"] = qn;
    j["Rbar"] = rbar;
    j["In"] = f.In;
    nlohmann::ordered_json anchors = nlohmann::ordered_json::array();
    for (Eigen::Index i = 0; i < f.anchors.rows(); ++i) {
        std::vector<double> z;
        for (Eigen::Index c = 0; c < f.anchors.cols(); ++c) z.push_back(f.anchors(i, c));
        anchors.push_back(nlohmann::ordered_json::array({z, f.values(i)}));
    }
    j["anchors"] = anchors;
    j["constants"] = constants_to_json(m.constants);
    j["seeds"] = {{"data", m.dataSeed}, {"net", m.netSeed}};
    j["N0"] = m.N0;
    j["tau"] = f.tau;
    j["lambda"] = f.lambda;
    j["netIndex"] = f.netIndex;
    j["empiricalLoss"] = f.empiricalLoss;
    j["sdpConverged"] = f.sdpConverged;
    j["sdpIterations"] = f.sdpIterations;
    return j.dump(2) + "\n";
}

inline ModelFile model_from_json(const std::string& text) {
    const nlohmann::json j = detail::parse_json(text, "model");
    const char* what = "model";
    const int version = detail::json_field<int>(j, "version", what);
    if (version != kModelFormatVersion)
        throw Error("version-mismatch", "model format version " + std::to_string(version) + " is not supported (expected " +
                                            std::to_string(kModelFormatVersion) + ")");
    ModelFile m;
    FitResult& f = m.fit;
    f.mode = parse_fit_mode(detail::json_field<std::string>(j, "mode", what));
    const auto d = detail::json_field<Eigen::Index>(j, "d", what);
    const auto k = detail::json_field<Eigen::Index>(j, "k", what);
    require(d >= 1 && k >= 1 && k <= d, "invalid-field", "model has inconsistent d and k");
    const auto qn = detail::json_field<std::vector<double>>(j, "Qn", what);
    const auto rbar = detail::json_field<std::vector<double>>(j, "Rbar", what);
    require(qn.size() == static_cast<std::size_t>(d * k) && rbar.size() == static_cast<std::size_t>(k * k),
            "invalid-field", "model matrices have the wrong size");
    f.Qn = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(qn.data(), d, k);
    f.Rbar = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(rbar.data(), k, k);
    f.In = detail::json_field<IndexSet>(j, "In", what);
    for (std::size_t r : f.In) require(r < static_cast<std::size_t>(d), "invalid-field", "model index set out of range");

    const nlohmann::json anchors = detail::json_field<nlohmann::json>(j, "anchors", what);
    require(anchors.is_array(), "invalid-field", "model anchors must be an array");
    f.anchors = Matrix(static_cast<Eigen::Index>(anchors.size()), k);
    f.values = Vector(static_cast<Eigen::Index>(anchors.size()));
    for (std::size_t i = 0; i < anchors.size(); ++i) {
        const nlohmann::json& a = anchors[i];
        require(a.is_array() && a.size() == 2 && a[0].is_array() && a[0].size() == static_cast<std::size_t>(k) &&
                    a[1].is_number(),
                "invalid-field", "model anchor " + std::to_string(i) + " must be [[z1..zk], F]");
        for (Eigen::Index c = 0; c < k; ++c) f.anchors(static_cast<Eigen::Index>(i), c) = a[0][static_cast<std::size_t>(c)].get<double>();
        f.values(static_cast<Eigen::Index>(i)) = a[1].get<double>();
    }
    m.constants = constants_from_json(detail::json_field<nlohmann::json>(j, "constants", what), what);
    const nlohmann::json seeds = detail::json_field<nlohmann::json>(j, "seeds", what);
    m.dataSeed = detail::json_field<std::uint64_t>(seeds, "data", what);
    m.netSeed = detail::json_field<std::uint64_t>(seeds, "net", what);
    m.N0 = detail::json_field<std::size_t>(j, "N0", what);
    f.tau = detail::json_field<double>(j, "tau", what);
    f.lambda = detail::json_field<double>(j, "lambda", what);
    f.netIndex = detail::json_field<std::size_t>(j, "netIndex", what);
    f.empiricalLoss = detail::json_field<double>(j, "empiricalLoss", what);
    f.sdpConverged = detail::json_field<bool>(j, "sdpConverged", what);
    f.sdpIterations = detail::json_field<std::size_t>(j, "sdpIterations", what);
    return m;
}

}  // namespace mmi
