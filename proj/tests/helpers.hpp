#pragma once

#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "chitree/dataset.hpp"

namespace helpers {

using namespace chitree;

inline std::vector<std::int32_t> all_rows(const Dataset& d) {
    std::vector<std::int32_t> rows(d.n_rows());
    std::iota(rows.begin(), rows.end(), 0);
    return rows;
}

inline TrainContext make_ctx(const Dataset& d) {
    return TrainContext(d, Priors::estimate(d), CostMatrix::unit(d.n_classes()));
}

// Dataset with one numeric column named x; labels drive the class column.
inline Dataset numeric_dataset(std::vector<std::string> labels, std::vector<double> x) {
    DatasetBuilder b(labels.size());
    b.set_class(std::move(labels));
    b.add_numeric("x", std::move(x));
    return b.build();
}

inline std::vector<std::string> level_names(int n) {
    std::vector<std::string> out;
    for (int i = 0; i < n; ++i) out.push_back("L" + std::to_string(i));
    return out;
}

inline Dataset categorical_dataset(std::vector<std::string> labels,
                                   std::vector<std::int32_t> codes, int n_levels) {
    DatasetBuilder b(labels.size());
    b.set_class(std::move(labels));
    b.add_categorical("g", std::move(codes), level_names(n_levels));
    return b.build();
}

inline std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

inline std::string write_temp(const std::string& name, const std::string& text) {
    const std::string path = temp_path(name);
    std::ofstream out(path, std::ios::binary);
    out << text;
    return path;
}

inline std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace helpers
