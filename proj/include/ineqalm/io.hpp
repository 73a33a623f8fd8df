#pragma once

#include <cctype>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "ineqalm/certify.hpp"
#include "ineqalm/potts.hpp"
#include "ineqalm/problem.hpp"
#include "ineqalm/svm.hpp"

namespace ineqalm::io {

/// Shortest representation that round-trips a double exactly.
inline std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

namespace detail {

inline std::ifstream open_in(const std::string& path, std::ios_base::openmode mode = std::ios_base::in) {
    std::ifstream in(path, mode);
    if (!in) throw std::runtime_error("cannot read file: " + path);
    return in;
}

inline std::ofstream open_out(const std::string& path, std::ios_base::openmode mode = std::ios_base::out) {
    std::ofstream out(path, mode);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    return out;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.push_back("");
    return cells;
}

inline double parse_double(const std::string& cell, const std::string& context) {
    char* end = nullptr;
    const double v = std::strtod(cell.c_str(), &end);
    if (end == cell.c_str()) throw std::runtime_error("malformed number '" + cell + "' in " + context);
    return v;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Dense CSV matrices and vectors
// ---------------------------------------------------------------------------

inline Matrix read_matrix_csv(const std::string& path) {
    auto in = detail::open_in(path);
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::vector<double> row;
        for (const std::string& cell : detail::split_csv_line(line))
            row.push_back(detail::parse_double(cell, path));
        if (!rows.empty() && rows.front().size() != row.size())
            throw std::runtime_error("ragged CSV rows in " + path);
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw std::runtime_error("empty CSV matrix in " + path);
    Matrix out(rows.size(), rows.front().size());
    for (Index i = 0; i < out.rows(); ++i)
        for (Index j = 0; j < out.cols(); ++j) out(i, j) = rows[i][j];
    return out;
}

/// A vector stored as one column (or one row) of CSV.
inline Vector read_vector_csv(const std::string& path) {
    const Matrix m = read_matrix_csv(path);
    if (m.cols() == 1) return m.col(0);
    if (m.rows() == 1) return m.row(0).transpose();
    throw std::runtime_error("expected a single-column or single-row CSV vector in " + path);
}

inline void write_matrix_csv(const std::string& path, const Matrix& m) {
    auto out = detail::open_out(path);
    for (Index i = 0; i < m.rows(); ++i) {
        for (Index j = 0; j < m.cols(); ++j) {
            if (j) out << ',';
            out << fmt17(m(i, j));
        }
        out << '\n';
    }
}

inline void write_vector_csv(const std::string& path, const Vector& v) {
    write_matrix_csv(path, v);
}

// ---------------------------------------------------------------------------
// Iteration traces and check reports
// ---------------------------------------------------------------------------

inline constexpr const char* kTraceHeader =
    "k,aer,primal_infeasibility,complementarity,multiplier_negativity,objective,"
    "step_x,step_lambda,phi,varphi,inner_converged";

inline void write_trace_csv(const std::string& path, const std::vector<IterationTrace>& traces) {
    auto out = detail::open_out(path);
    out << kTraceHeader << '\n';
    for (const IterationTrace& t : traces) {
        out << t.k << ',' << fmt17(t.aer) << ',' << fmt17(t.primal_infeasibility) << ','
            << fmt17(t.complementarity) << ',' << fmt17(t.multiplier_negativity) << ','
            << (t.objective ? fmt17(*t.objective) : "") << ',' << fmt17(t.step_x) << ','
            << fmt17(t.step_lambda) << ',' << (t.phi ? fmt17(*t.phi) : "") << ','
            << (t.varphi ? fmt17(*t.varphi) : "") << ','
            << (t.inner_converged ? (*t.inner_converged ? "1" : "0") : "") << '\n';
    }
}

inline std::vector<IterationTrace> read_trace_csv(const std::string& path) {
    auto in = detail::open_in(path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty trace CSV: " + path);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kTraceHeader) throw std::runtime_error("unexpected trace CSV header in " + path);
    std::vector<IterationTrace> traces;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto cells = detail::split_csv_line(line);
        if (cells.size() != 11) throw std::runtime_error("bad trace row in " + path);
        IterationTrace t;
        t.k = static_cast<long>(detail::parse_double(cells[0], path));
        t.aer = detail::parse_double(cells[1], path);
        t.primal_infeasibility = detail::parse_double(cells[2], path);
        t.complementarity = detail::parse_double(cells[3], path);
        t.multiplier_negativity = detail::parse_double(cells[4], path);
        if (!cells[5].empty()) t.objective = detail::parse_double(cells[5], path);
        t.step_x = detail::parse_double(cells[6], path);
        t.step_lambda = detail::parse_double(cells[7], path);
        if (!cells[8].empty()) t.phi = detail::parse_double(cells[8], path);
        if (!cells[9].empty()) t.varphi = detail::parse_double(cells[9], path);
        if (!cells[10].empty()) t.inner_converged = cells[10] != "0";
        traces.push_back(t);
    }
    return traces;
}

inline constexpr const char* kCheckHeader = "iteration,check,lhs,rhs,slack,tolerance,pass";

inline void write_check_csv(const std::string& path,
                            const std::vector<certify::CheckReport>& reports) {
    auto out = detail::open_out(path);
    out << kCheckHeader << '\n';
    for (const certify::CheckReport& r : reports)
        out << r.iteration << ',' << r.name << ',' << fmt17(r.lhs) << ',' << fmt17(r.rhs) << ','
            << fmt17(r.slack) << ',' << fmt17(r.tolerance) << ',' << (r.pass ? 1 : 0) << '\n';
}

// ---------------------------------------------------------------------------
// SVM dataset CSV: columns f1..fn,label
// ---------------------------------------------------------------------------

inline void write_svm_csv(const std::string& path, const svm::SvmDataset& data) {
    auto out = detail::open_out(path);
    for (Index j = 0; j < data.dim(); ++j) out << 'f' << (j + 1) << ',';
    out << "label\n";
    for (Index i = 0; i < data.count(); ++i) {
        for (Index j = 0; j < data.dim(); ++j) out << fmt17(data.points(i, j)) << ',';
        out << data.labels[i] << '\n';
    }
}

inline svm::SvmDataset read_svm_csv(const std::string& path) {
    auto in = detail::open_in(path);
    std::vector<std::vector<double>> rows;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto cells = detail::split_csv_line(line);
        if (first) {
            first = false;
            char* end = nullptr;
            std::strtod(cells[0].c_str(), &end);
            if (end == cells[0].c_str()) continue;  // header row
        }
        std::vector<double> row;
        for (const std::string& cell : cells) row.push_back(detail::parse_double(cell, path));
        if (!rows.empty() && rows.front().size() != row.size())
            throw std::runtime_error("ragged dataset rows in " + path);
        rows.push_back(std::move(row));
    }
    if (rows.empty() || rows.front().size() < 2)
        throw std::runtime_error("dataset needs at least one feature and a label: " + path);
    svm::SvmDataset data;
    const Index n = static_cast<Index>(rows.front().size()) - 1;
    data.points.resize(rows.size(), n);
    data.labels.resize(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (Index j = 0; j < n; ++j) data.points(i, j) = rows[i][j];
        const double lab = rows[i][n];
        if (lab != 1.0 && lab != -1.0)
            throw std::runtime_error("labels must be +-1 in " + path);
        data.labels[static_cast<Index>(i)] = static_cast<int>(lab);
    }
    return data;
}

// ---------------------------------------------------------------------------
// PGM (P2 ASCII / P5 binary), intensities normalized to [0, 1]
// ---------------------------------------------------------------------------

struct Image2d {
    potts::GridShape grid;  // nz == 1
    Vector pixels;          // row-major, x fastest
};

namespace detail {

inline int next_pgm_token(std::istream& in, std::string& tok) {
    tok.clear();
    int c;
    while ((c = in.get()) != EOF) {
        if (c == '#') {
            while ((c = in.get()) != EOF && c != '\n') {}
            continue;
        }
        if (std::isspace(c)) {
            if (!tok.empty()) return 1;
            continue;
        }
        tok.push_back(static_cast<char>(c));
    }
    return tok.empty() ? 0 : 1;
}

}  // namespace detail

inline Image2d read_pgm(const std::string& path) {
    auto in = detail::open_in(path, std::ios_base::in | std::ios_base::binary);
    std::string tok;
    if (!detail::next_pgm_token(in, tok) || (tok != "P2" && tok != "P5"))
        throw std::runtime_error("not a P2/P5 PGM file: " + path);
    const bool binary = tok == "P5";
    long w = 0, h = 0, maxval = 0;
    auto read_int = [&](long& v) {
        if (!detail::next_pgm_token(in, tok)) throw std::runtime_error("truncated PGM header: " + path);
        v = std::strtol(tok.c_str(), nullptr, 10);
    };
    read_int(w);
    read_int(h);
    read_int(maxval);
    if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 65535)
        throw std::runtime_error("bad PGM header in " + path);

    Image2d img;
    img.grid = {w, h, 1};
    img.pixels.resize(w * h);
    if (binary) {
        // exactly one whitespace byte separates the header from the raster
        const int bytes = maxval > 255 ? 2 : 1;
        std::vector<unsigned char> raw(static_cast<std::size_t>(w) * h * bytes);
        in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
        if (in.gcount() != static_cast<std::streamsize>(raw.size()))
            throw std::runtime_error("truncated PGM raster in " + path);
        for (Index s = 0; s < img.pixels.size(); ++s) {
            const unsigned long v = bytes == 1 ? raw[s] : (raw[2 * s] << 8 | raw[2 * s + 1]);
            img.pixels[s] = static_cast<double>(v) / static_cast<double>(maxval);
        }
    } else {
        for (Index s = 0; s < img.pixels.size(); ++s) {
            if (!detail::next_pgm_token(in, tok))
                throw std::runtime_error("truncated PGM raster in " + path);
            img.pixels[s] = std::strtod(tok.c_str(), nullptr) / static_cast<double>(maxval);
        }
    }
    return img;
}

inline void write_pgm(const std::string& path, const potts::GridShape& grid, const Vector& pixels) {
    if (grid.nz != 1) throw std::invalid_argument("write_pgm: 2D grids only");
    if (pixels.size() != grid.sites()) throw std::invalid_argument("write_pgm: size mismatch");
    auto out = detail::open_out(path, std::ios_base::out | std::ios_base::binary);
    out << "P5\n" << grid.nx << ' ' << grid.ny << "\n255\n";
    for (Index s = 0; s < pixels.size(); ++s) {
        const double clipped = std::min(1.0, std::max(0.0, pixels[s]));
        out.put(static_cast<char>(static_cast<unsigned char>(std::lround(clipped * 255.0))));
    }
}

/// Label maps spread {1..m} over the 8-bit gray range.
inline void write_label_pgm(const std::string& path, const potts::GridShape& grid,
                            const std::vector<int>& labels, int m) {
    Vector pixels(static_cast<Index>(labels.size()));
    for (std::size_t i = 0; i < labels.size(); ++i)
        pixels[static_cast<Index>(i)] = m > 1 ? static_cast<double>(labels[i] - 1) / (m - 1) : 0.0;
    write_pgm(path, grid, pixels);
}

// ---------------------------------------------------------------------------
// RAW3D: ASCII header "RAW3D nx ny nz\n" + little-endian float32, x fastest
// ---------------------------------------------------------------------------

struct Image3d {
    potts::GridShape grid;
    Vector voxels;
};

namespace detail {

inline std::uint32_t to_le(float f) {
    std::uint32_t bits;
    std::memcpy(&bits, &f, sizeof(bits));
    const unsigned char b0 = bits & 0xff, b1 = (bits >> 8) & 0xff, b2 = (bits >> 16) & 0xff,
                        b3 = (bits >> 24) & 0xff;
    return static_cast<std::uint32_t>(b0) | static_cast<std::uint32_t>(b1) << 8 |
           static_cast<std::uint32_t>(b2) << 16 | static_cast<std::uint32_t>(b3) << 24;
}

inline float from_le_bytes(const unsigned char* p) {
    const std::uint32_t bits = static_cast<std::uint32_t>(p[0]) |
                               static_cast<std::uint32_t>(p[1]) << 8 |
                               static_cast<std::uint32_t>(p[2]) << 16 |
                               static_cast<std::uint32_t>(p[3]) << 24;
    float f;
    std::memcpy(&f, &bits, sizeof(f));
    return f;
}

}  // namespace detail

inline void write_raw3d(const std::string& path, const potts::GridShape& grid, const Vector& voxels) {
    if (voxels.size() != grid.sites()) throw std::invalid_argument("write_raw3d: size mismatch");
    auto out = detail::open_out(path, std::ios_base::out | std::ios_base::binary);
    out << "RAW3D " << grid.nx << ' ' << grid.ny << ' ' << grid.nz << '\n';
    for (Index s = 0; s < voxels.size(); ++s) {
        const std::uint32_t le = detail::to_le(static_cast<float>(voxels[s]));
        const unsigned char bytes[4] = {static_cast<unsigned char>(le & 0xff),
                                        static_cast<unsigned char>((le >> 8) & 0xff),
                                        static_cast<unsigned char>((le >> 16) & 0xff),
                                        static_cast<unsigned char>((le >> 24) & 0xff)};
        out.write(reinterpret_cast<const char*>(bytes), 4);
    }
}

inline Image3d read_raw3d(const std::string& path) {
    auto in = detail::open_in(path, std::ios_base::in | std::ios_base::binary);
    std::string header;
    if (!std::getline(in, header)) throw std::runtime_error("truncated RAW3D header: " + path);
    std::stringstream hs(header);
    std::string magic;
    long nx = 0, ny = 0, nz = 0;
    hs >> magic >> nx >> ny >> nz;
    if (magic != "RAW3D" || nx <= 0 || ny <= 0 || nz <= 0)
        throw std::runtime_error("bad RAW3D header in " + path);
    Image3d img;
    img.grid = {nx, ny, nz};
    img.voxels.resize(img.grid.sites());
    std::vector<unsigned char> raw(static_cast<std::size_t>(img.voxels.size()) * 4);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (in.gcount() != static_cast<std::streamsize>(raw.size()))
        throw std::runtime_error("truncated RAW3D voxels in " + path);
    for (Index s = 0; s < img.voxels.size(); ++s)
        img.voxels[s] = detail::from_le_bytes(raw.data() + 4 * s);
    return img;
}

}  // namespace ineqalm::io
