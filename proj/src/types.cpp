// SPDX-License-Identifier: Apache-2.0
//
// nfisr - near-field inverse source imaging with modulated signals
// Copyright (C) 2026 The nfisr authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#include "nfisr/types.hpp"

#include <cstdio>

namespace nfisr
{
    char component_name(Component c)
    {
        return "xyz"[index_of(c)];
    }

    Component parse_component(const std::string &name)
    {
        if (name == "x" || name == "X")
            return Component::x;
        if (name == "y" || name == "Y")
            return Component::y;
        if (name == "z" || name == "Z")
            return Component::z;
        throw Error(ErrorKind::config, "unknown vector component '" + name + "'");
    }

    const char *error_kind_name(ErrorKind kind)
    {
        switch (kind)
        {
        case ErrorKind::domain: return "domain error";
        case ErrorKind::overflow: return "overflow";
        case ErrorKind::singularity: return "singularity";
        case ErrorKind::config: return "configuration error";
        case ErrorKind::degenerate_reference: return "degenerate reference";
        case ErrorKind::framing: return "framing error";
        case ErrorKind::undefined_harmonic: return "undefined harmonic";
        case ErrorKind::singular_translation: return "singular translation";
        case ErrorKind::validity: return "validity error";
        case ErrorKind::contract: return "contract error";
        case ErrorKind::incompatible: return "incompatible data";
        case ErrorKind::metric: return "metric error";
        case ErrorKind::io: return "i/o error";
        }
        return "error";
    }

    void warn(const std::string &message)
    {
        std::fprintf(stderr, "warning: %s\n", message.c_str());
    }
}
