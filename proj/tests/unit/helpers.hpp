#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "distreg/data_table.hpp"
#include "distreg/design.hpp"
#include "distreg/family.hpp"
#include "distreg/formula.hpp"

namespace testing {

inline distreg::ModelFrame frame_for(const std::vector<std::string>& formulas, const distreg::DataTable& data,
                                     distreg::FamilyPtr family) {
    return distreg::build_frame(distreg::parse_formula_set(formulas, *family), data, family);
}

inline Eigen::VectorXd column(const distreg::DataTable& d, const std::string& name) {
    const auto& c = d.column(name).num;
    return Eigen::Map<const Eigen::VectorXd>(c.data(), static_cast<Eigen::Index>(c.size()));
}

inline std::string source_path(const std::string& rel) { return std::string(DISTREG_SOURCE_DIR) + "/" + rel; }

}
