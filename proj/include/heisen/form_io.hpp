#pragma once

// Versioned little-endian binary dumps of form fields, sampled maps and
// linking forms.  The layout is documented in docs/formats.md.

#include <heisen/forms.hpp>
#include <heisen/linking.hpp>
#include <heisen/mollify.hpp>

#include <iosfwd>
#include <string>

namespace heisen {

inline constexpr std::uint32_t kFormatVersion = 1;

void write_form_field(std::ostream& os, const FormField& f);
FormField read_form_field(std::istream& is);

/// Lazy maps are materialized before writing.
void write_sampled_map(std::ostream& os, const SampledMap& f);
SampledMap read_sampled_map(std::istream& is);

/// The exact evaluator is not stored; a form read back has none.
void write_linking_form(std::ostream& os, const LinkingForm& f);
LinkingForm read_linking_form(std::istream& is);

void save_form_field(const std::string& path, const FormField& f);
FormField load_form_field(const std::string& path);
void save_sampled_map(const std::string& path, const SampledMap& f);
SampledMap load_sampled_map(const std::string& path);
void save_linking_form(const std::string& path, const LinkingForm& f);
LinkingForm load_linking_form(const std::string& path);

} // namespace heisen
