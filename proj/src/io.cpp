#include "heapsae/io.hpp"

#include "heapsae/tables.hpp"

#include <algorithm>
#include <charconv>
#include <map>
#include <set>

namespace heapsae {

namespace {

// Indices of x1..xp in column order x1, x2, ...; names must be contiguous.
std::vector<std::size_t> covariate_columns(const Table& t, const std::string& source,
                                           std::vector<std::string>& names) {
    std::map<int, std::size_t> found;
    for (std::size_t i = 0; i < t.columns.size(); ++i) {
        const std::string& c = t.columns[i];
        if (c.size() < 2 || c[0] != 'x') {
            continue;
        }
        int k = 0;
        const auto [ptr, ec] = std::from_chars(c.data() + 1, c.data() + c.size(), k);
        if (ec != std::errc() || ptr != c.data() + c.size() || k < 1) {
            continue;
        }
        if (!found.emplace(k, i).second) {
            throw DataError(source + ": column '" + c + "' appears twice");
        }
    }
    std::vector<std::size_t> out;
    names.clear();
    int expected = 1;
    for (const auto& [k, i] : found) {
        if (k != expected++) {
            throw DataError(source + ": covariate columns must be x1..xp without gaps; x" +
                            std::to_string(expected - 1) + " is missing");
        }
        out.push_back(i);
        names.push_back(t.columns[i]);
    }
    return out;
}

int parse_domain(const std::string& field, const std::string& source, std::size_t line) {
    const int d = parse_int(field, source, line, "domain");
    if (d < 1) {
        throw DataError(source + ":" + std::to_string(line) + ": column 'domain': must be a positive integer, got " +
                        field);
    }
    return d - 1;
}

bool is_missing(const std::string& field) {
    return field.empty() || field == "NA";
}

}  // namespace

bool SampleFile::any_nonparticipant() const {
    return std::any_of(records.begin(), records.end(), [](const UnitRecord& r) { return r.w && *r.w == 0; });
}

std::vector<UnitRecord> SampleFile::participants() const {
    std::vector<UnitRecord> out;
    for (const auto& r : records) {
        if (r.w && *r.w == 1) {
            out.push_back(r);
        }
    }
    return out;
}

int SampleFile::max_domain() const {
    int m = -1;
    for (const auto& r : records) {
        m = std::max(m, r.domain);
    }
    return m;
}

SampleFile read_sample(const std::string& path, HeapingMode mode) {
    const Table t = read_table(path);
    SampleFile out;
    const std::size_t cd = t.require("domain", path);
    const std::vector<std::size_t> cx = covariate_columns(t, path, out.covariates);
    const std::size_t cw = t.find("w");
    const std::size_t cz = t.find("zstar");
    out.has_w = cw != std::string::npos;
    if (t.rows.empty()) {
        throw DataError(path + ": no data rows");
    }
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& row = t.rows[i];
        const std::size_t line = t.line(i);
        UnitRecord r;
        r.domain = parse_domain(row[cd], path, line);
        for (std::size_t j = 0; j < cx.size(); ++j) {
            r.x.push_back(parse_double(row[cx[j]], path, line, out.covariates[j]));
        }
        int w = 1;
        if (out.has_w) {
            w = parse_int(row[cw], path, line, "w");
            if (w != 0 && w != 1) {
                throw DataError(path + ":" + std::to_string(line) + ": column 'w': must be 0 or 1, got " + row[cw]);
            }
        }
        r.w = w;
        const bool zmissing = cz == std::string::npos || is_missing(row[cz]);
        if (w == 1) {
            if (zmissing) {
                throw DataError(path + ":" + std::to_string(line) + ": column 'zstar': required for participants");
            }
            const int v = parse_int(row[cz], path, line, "zstar");
            if (v < 1 || v > 21) {
                throw DataError(path + ":" + std::to_string(line) + ": column 'zstar': must lie in 1..21, got " +
                                row[cz]);
            }
            r.answer = ObservedAnswer::from_report(v, mode);
        } else if (!zmissing) {
            throw DataError(path + ":" + std::to_string(line) + ": column 'zstar': must be empty when w = 0");
        }
        out.records.push_back(std::move(r));
    }
    return out;
}

void write_sample(const std::string& path, const std::vector<std::string>& covariates,
                  const std::vector<UnitRecord>& records) {
    Table t;
    t.columns = {"domain"};
    t.columns.insert(t.columns.end(), covariates.begin(), covariates.end());
    t.columns.push_back("w");
    t.columns.push_back("zstar");
    for (const auto& r : records) {
        std::vector<std::string> row{std::to_string(r.domain + 1)};
        for (double v : r.x) {
            row.push_back(format_double(v));
        }
        const int w = r.w.value_or(1);
        row.push_back(std::to_string(w));
        row.push_back(w == 1 && r.answer ? std::to_string(r.answer->value) : "");
        t.rows.push_back(std::move(row));
    }
    write_table(path, t);
}

FrameFile read_frame(const std::string& path) {
    const Table t = read_table(path);
    FrameFile out;
    const std::size_t cd = t.require("domain", path);
    const std::vector<std::size_t> cx = covariate_columns(t, path, out.covariates);
    const std::size_t cc = t.find("count");
    if (t.rows.empty()) {
        throw DataError(path + ": no data rows");
    }
    std::vector<int> domain;
    std::vector<std::vector<double>> x;
    std::vector<long long> count;
    int domains = 0;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& row = t.rows[i];
        const std::size_t line = t.line(i);
        domain.push_back(parse_domain(row[cd], path, line));
        domains = std::max(domains, domain.back() + 1);
        std::vector<double> xi;
        for (std::size_t j = 0; j < cx.size(); ++j) {
            xi.push_back(parse_double(row[cx[j]], path, line, out.covariates[j]));
        }
        x.push_back(std::move(xi));
        long long n = 1;
        if (cc != std::string::npos) {
            n = parse_int(row[cc], path, line, "count");
            if (n < 1) {
                throw DataError(path + ":" + std::to_string(line) + ": column 'count': must be positive, got " +
                                row[cc]);
            }
        }
        count.push_back(n);
    }
    out.frame = PopulationFrame::from_patterns(domains, domain, x, count);
    return out;
}

void write_frame(const std::string& path, const std::vector<std::string>& covariates, const PopulationFrame& frame) {
    Table t;
    t.columns = {"domain"};
    t.columns.insert(t.columns.end(), covariates.begin(), covariates.end());
    t.columns.push_back("count");
    for (std::size_t c = 0; c < frame.pattern_domain.size(); ++c) {
        std::vector<std::string> row{std::to_string(frame.pattern_domain[c] + 1)};
        for (double v : frame.pattern_x[c]) {
            row.push_back(format_double(v));
        }
        row.push_back(std::to_string(frame.pattern_count[c]));
        t.rows.push_back(std::move(row));
    }
    write_table(path, t);
}

void check_sample_against_frame(const SampleFile& sample, const FrameFile& frame, const std::string& sample_path,
                                const std::string& frame_path) {
    if (sample.covariates != frame.covariates) {
        throw DataError(sample_path + " and " + frame_path + " have different covariate columns");
    }
    std::set<int> present(frame.frame.pattern_domain.begin(), frame.frame.pattern_domain.end());
    for (std::size_t i = 0; i < sample.records.size(); ++i) {
        const int d = sample.records[i].domain;
        if (!present.count(d)) {
            throw DataError(sample_path + ": row " + std::to_string(i + 1) + ": domain " + std::to_string(d + 1) +
                            " is absent from " + frame_path);
        }
    }
}

}  // namespace heapsae
