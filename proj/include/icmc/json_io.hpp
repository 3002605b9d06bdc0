#pragma once

#include <string>

#include "json.hpp"

#include "icmc/data.hpp"
#include "icmc/fit.hpp"
#include "icmc/uncertainty.hpp"

namespace icmc {

nlohmann::json dataset_to_json(const CureDataset& ds);
CureDataset dataset_from_json(const nlohmann::json& j);

nlohmann::json fit_result_to_json(const FitResult& fit);
FitResult fit_result_from_json(const nlohmann::json& j);

nlohmann::json bootstrap_to_json(const BootstrapResult& boot, const FitResult& fit);

void write_json_file(const nlohmann::json& j, const std::string& path);
nlohmann::json read_json_file(const std::string& path);

}  // namespace icmc
