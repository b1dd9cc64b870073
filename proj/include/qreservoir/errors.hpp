// Copyright 2026 The qreservoir Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace qrc {

/// Base of every error thrown by the library. Each subclass names one
/// failure category so callers (and tests) can dispatch on the type.
class Error : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

#define QRC_DEFINE_ERROR(Name)                  \
    class Name : public Error {                 \
       public:                                  \
        explicit Name(const std::string &what) : Error(what) {} \
    }

QRC_DEFINE_ERROR(SizeError);
QRC_DEFINE_ERROR(IndexError);
QRC_DEFINE_ERROR(ArgumentError);
QRC_DEFINE_ERROR(DomainError);
QRC_DEFINE_ERROR(ShapeError);
QRC_DEFINE_ERROR(NumericError);
QRC_DEFINE_ERROR(UnsupportedGateError);
QRC_DEFINE_ERROR(SchemaError);
QRC_DEFINE_ERROR(IntegrityError);
QRC_DEFINE_ERROR(DegenerateInputError);
QRC_DEFINE_ERROR(IoError);

#undef QRC_DEFINE_ERROR

/// Malformed cell in a CSV file; carries the 1-based data row number.
class ParseError : public Error {
   public:
    ParseError(const std::string &what, size_t row) : Error(what), row_(row) {}
    size_t row() const { return row_; }

   private:
    size_t row_;
};

}  // namespace qrc
