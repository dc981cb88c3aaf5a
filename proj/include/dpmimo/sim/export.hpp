// SPDX-License-Identifier: Apache-2.0
//
// dpmimo - dual-polarized MIMO link-level simulation for rail tunnels
// Copyright (C) 2026 The dpmimo authors
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


#ifndef DPMIMO_SIM_EXPORT_HPP
#define DPMIMO_SIM_EXPORT_HPP

#include "dpmimo/sim/experiment.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

// CSV layout:
//   # key=value metadata lines
//   sweep,metric,mean,ci95,trials
//   one row per (sweep value, metric), numbers in %.17g

namespace dpmimo::sim
{
    inline std::string format_number(double x)
    {
        if (std::isnan(x))
            return "nan";
        if (std::isinf(x))
            return x > 0 ? "inf" : "-inf";
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.17g", x);
        return buf;
    }

    inline double parse_number(const std::string &s)
    {
        if (s == "nan")
            return std::numeric_limits<double>::quiet_NaN();
        if (s == "inf")
            return std::numeric_limits<double>::infinity();
        if (s == "-inf")
            return -std::numeric_limits<double>::infinity();
        size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size())
            throw std::invalid_argument("malformed number '" + s + "'");
        return v;
    }

    inline std::string metadata_block(const ResultTable &t)
    {
        char hash[24];
        std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(t.config_hash));
        std::ostringstream os;
        os << "# config_hash=" << hash << '\n';
        os << "# seed=" << t.seed << '\n';
        os << "# code_version=" << t.code_version << '\n';
        os << "# sweep_param=" << t.sweep_param << '\n';
        os << "# channel=" << t.channel << '\n';
        if (t.channel == "lcx")
            os << "# channel_model=approximate\n";
        for (const auto &f : t.failures)
            os << "# failure=" << f << '\n';
        if (!t.timestamp.empty())
            os << "# timestamp=" << t.timestamp << '\n';
        return os.str();
    }

    inline std::string to_csv(const ResultTable &t)
    {
        std::ostringstream os;
        os << metadata_block(t);
        os << "sweep,metric,mean,ci95,trials\n";
        for (const auto &r : t.rows)
            os << format_number(r.sweep) << ',' << r.metric << ',' << format_number(r.mean) << ','
               << format_number(r.ci95) << ',' << r.trials << '\n';
        return os.str();
    }

    inline void write_file(const std::string &path, const std::string &content)
    {
        std::ofstream f(path, std::ios::binary | std::ios::trunc);
        if (!f)
            throw std::runtime_error("cannot write '" + path + "'");
        f << content;
        f.close();
        if (!f)
            throw std::runtime_error("cannot write '" + path + "'");
    }

    inline void export_csv(const ResultTable &t, const std::string &path)
    {
        if (t.rows.empty())
            throw std::invalid_argument("empty result table");
        write_file(path, to_csv(t));
    }

    // One whitespace-separated block per metric (sweep mean ci95), blocks separated by two blank lines.
    inline std::string to_plotdata(const ResultTable &t)
    {
        std::vector<std::string> order;
        for (const auto &r : t.rows)
            if (std::find(order.begin(), order.end(), r.metric) == order.end())
                order.push_back(r.metric);
        std::ostringstream os;
        os << metadata_block(t);
        for (size_t i = 0; i < order.size(); ++i)
        {
            if (i > 0)
                os << "\n\n";
            os << "# metric=" << order[i] << '\n';
            os << "# " << t.sweep_param << " mean ci95\n";
            for (const auto &r : t.rows)
                if (r.metric == order[i])
                    os << format_number(r.sweep) << ' ' << format_number(r.mean) << ' ' << format_number(r.ci95)
                       << '\n';
        }
        return os.str();
    }

    inline void export_plotdata(const ResultTable &t, const std::string &path)
    {
        if (t.rows.empty())
            throw std::invalid_argument("empty result table");
        write_file(path, to_plotdata(t));
    }

    inline std::vector<std::string> split(const std::string &s, char sep)
    {
        std::vector<std::string> out;
        std::string cur;
        std::istringstream is(s);
        while (std::getline(is, cur, sep))
            out.push_back(cur);
        if (!s.empty() && s.back() == sep)
            out.emplace_back();
        return out;
    }

    inline ResultTable parse_csv(const std::string &text)
    {
        ResultTable t;
        t.code_version.clear();
        std::istringstream is(text);
        std::string line;
        bool header = false;
        while (std::getline(is, line))
        {
            if (line.empty())
                continue;
            if (line[0] == '#')
            {
                const auto eq = line.find('=');
                if (eq == std::string::npos)
                    continue;
                const std::string key = line.substr(2, eq - 2);
                const std::string val = line.substr(eq + 1);
                if (key == "config_hash")
                    t.config_hash = std::stoull(val, nullptr, 16);
                else if (key == "seed")
                    t.seed = std::stoull(val);
                else if (key == "code_version")
                    t.code_version = val;
                else if (key == "sweep_param")
                    t.sweep_param = val;
                else if (key == "channel")
                    t.channel = val;
                else if (key == "failure")
                    t.failures.push_back(val);
                else if (key == "timestamp")
                    t.timestamp = val;
                continue;
            }
            if (!header)
            {
                if (line != "sweep,metric,mean,ci95,trials")
                    throw std::invalid_argument("unexpected CSV header");
                header = true;
                continue;
            }
            const auto f = split(line, ',');
            if (f.size() != 5)
                throw std::invalid_argument("malformed CSV row '" + line + "'");
            t.rows.push_back({parse_number(f[0]), f[1], parse_number(f[2]), parse_number(f[3]), std::stoi(f[4])});
        }
        if (!header)
            throw std::invalid_argument("missing CSV header");
        return t;
    }

    inline ResultTable read_csv(const std::string &path)
    {
        std::ifstream f(path, std::ios::binary);
        if (!f)
            throw std::runtime_error("cannot read '" + path + "'");
        std::ostringstream os;
        os << f.rdbuf();
        return parse_csv(os.str());
    }
} // namespace dpmimo::sim

#endif
