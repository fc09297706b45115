#pragma once

#include <splitsolve/model.hpp>

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>

#include <json.hpp>

namespace splitsolve {

inline constexpr int kUnitFormatVersion = 1;

/// A work-unit file (or in-memory document) that could not be decoded.
class UnitFormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

auto model_to_json(const Model & model) -> nlohmann::json;
/// Decodes and validates; throws UnitFormatError or InvalidModel.
auto model_from_json(const nlohmann::json & doc) -> Model;

/// Canonical text: sorted keys, one field per line, integer arrays inline.
/// The same model always produces the same bytes.
auto canonical_text(const nlohmann::json & doc) -> std::string;
auto serialize_model(const Model & model) -> std::string;
auto parse_model(std::string_view text) -> Model;

/// Writes via a temporary file and rename so readers never see a partial unit.
void write_unit(const Model & model, const std::filesystem::path & path);
auto read_unit(const std::filesystem::path & path) -> Model;

/// Atomically replaces path with contents.
void write_file_atomic(const std::filesystem::path & path, std::string_view contents);
auto read_file(const std::filesystem::path & path) -> std::string;

/// 64-bit FNV-1a digest, as 16 hex digits.
auto content_digest(std::string_view bytes) -> std::string;

} // namespace splitsolve
