#include "chb/grid.hpp"

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <ostream>
#include <sstream>

#include "chb/kernels.hpp"

namespace chb {

GridSpec::GridSpec(int nx, int ny, double lx, double ly)
    : nx(nx), ny(ny), lx(lx), ly(ly) {
    if (nx < 4 || ny < 4) throw ConfigError("GridSpec: nx, ny must be >= 4");
    if (!(lx > 0.0) || !(ly > 0.0)) throw ConfigError("GridSpec: lx, ly must be > 0");
    hx = lx / nx;
    hy = ly / ny;
}

bool ScalarField::all_finite() const {
    for (double v : v_)
        if (!std::isfinite(v)) return false;
    return true;
}

void FaceField::zero_normal_boundary() {
    for (int j = 0; j < grid_.ny; ++j) {
        x(0, j) = 0.0;
        x(grid_.nx, j) = 0.0;
    }
    for (int i = 0; i < grid_.nx; ++i) {
        y(i, 0) = 0.0;
        y(i, grid_.ny) = 0.0;
    }
}

bool FaceField::normal_boundary_is_zero() const {
    for (int j = 0; j < grid_.ny; ++j)
        if (x(0, j) != 0.0 || x(grid_.nx, j) != 0.0) return false;
    for (int i = 0; i < grid_.nx; ++i)
        if (y(i, 0) != 0.0 || y(i, grid_.ny) != 0.0) return false;
    return true;
}

bool FaceField::all_finite() const {
    for (double v : fx_)
        if (!std::isfinite(v)) return false;
    for (double v : fy_)
        if (!std::isfinite(v)) return false;
    return true;
}

FaceField gradient(const ScalarField& f) {
    const GridSpec& g = f.grid();
    FaceField out(g);
    kernels::gradient(f.data(), g.nx, g.ny, g.hx, g.hy, out.xdata(), out.ydata());
    return out;
}

ScalarField divergence(const FaceField& F) {
    const GridSpec& g = F.grid();
    ScalarField out(g);
    kernels::divergence(F.xdata(), F.ydata(), g.nx, g.ny, g.hx, g.hy, out.data());
    return out;
}

ScalarField laplacian_neumann(const ScalarField& f) {
    const GridSpec& g = f.grid();
    ScalarField out(g);
    kernels::laplacian(f.data(), g.nx, g.ny, g.hx, g.hy, out.data());
    return out;
}

ScalarField bilaplacian_neumann(const ScalarField& f) {
    return laplacian_neumann(laplacian_neumann(f));
}

static void require_same_grid(const GridSpec& a, const GridSpec& b) {
    if (!(a == b)) throw ConfigError("fields live on different grids");
}

double inner_product(const ScalarField& f, const ScalarField& g) {
    require_same_grid(f.grid(), g.grid());
    return kernels::dot(f.data(), g.data(), f.size()) * f.grid().cell_volume();
}

double integral(const ScalarField& f) {
    return kernels::sum(f.data(), f.size()) * f.grid().cell_volume();
}

double mean(const ScalarField& f) { return integral(f) / f.grid().area(); }

double inner_product(const FaceField& F, const FaceField& G) {
    require_same_grid(F.grid(), G.grid());
    const double vol = F.grid().cell_volume();
    return (kernels::dot(F.xdata(), G.xdata(), F.xsize()) +
            kernels::dot(F.ydata(), G.ydata(), F.ysize())) * vol;
}

double norm_sq(const FaceField& F) { return inner_product(F, F); }

double norm_sq(const ScalarField& f) { return inner_product(f, f); }

double min_value(const ScalarField& f) { return kernels::min_value(f.data(), f.size()); }

double max_abs(const ScalarField& f) { return kernels::max_abs(f.data(), f.size()); }

double max_abs(const FaceField& F) {
    return std::max(kernels::max_abs(F.xdata(), F.xsize()),
                    kernels::max_abs(F.ydata(), F.ysize()));
}

// ------------------------------------------------------------- snapshots

static void write_header(std::ostream& os, const ScalarField& f,
                         const std::string& name, double time, bool binary) {
    if (name.find_first_of(" \t\n") != std::string::npos)
        throw ConfigError("field name must not contain whitespace: " + name);
    const GridSpec& g = f.grid();
    char buf[256];
    std::snprintf(buf, sizeof buf, "CHB-FIELD v1 %d %d %.17g %.17g %s %.17g %s\n",
                  g.nx, g.ny, g.lx, g.ly, name.c_str(), time,
                  binary ? "binary" : "ascii");
    os << buf;
}

void write_field(std::ostream& os, const ScalarField& f, const std::string& name,
                 double time, bool binary) {
    write_header(os, f, name, time, binary);
    const GridSpec& g = f.grid();
    if (binary) {
        os.write(reinterpret_cast<const char*>(f.data()),
                 (std::streamsize)(f.size() * sizeof(double)));
    } else {
        char buf[32];
        for (int j = 0; j < g.ny; ++j) {
            for (int i = 0; i < g.nx; ++i) {
                std::snprintf(buf, sizeof buf, "%.17g", f(i, j));
                os << buf << (i + 1 < g.nx ? ' ' : '\n');
            }
        }
    }
}

void write_field(const std::string& path, const ScalarField& f, const std::string& name,
                 double time, bool binary) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ConfigError("cannot open for writing: " + path);
    write_field(os, f, name, time, binary);
}

FieldSnapshot read_field(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw ConfigError("empty field stream");
    std::istringstream hs(line);
    std::string magic, ver, name, mode;
    int nx, ny;
    double lx, ly, time;
    hs >> magic >> ver >> nx >> ny >> lx >> ly >> name >> time >> mode;
    if (!hs || magic != "CHB-FIELD" || ver != "v1")
        throw ConfigError("bad field header: " + line);
    FieldSnapshot snap;
    snap.name = name;
    snap.time = time;
    snap.field = ScalarField(GridSpec(nx, ny, lx, ly));
    if (mode == "binary") {
        is.read(reinterpret_cast<char*>(snap.field.data()),
                (std::streamsize)(snap.field.size() * sizeof(double)));
        if (!is) throw ConfigError("truncated binary field payload");
    } else if (mode == "ascii") {
        for (std::size_t k = 0; k < snap.field.size(); ++k)
            if (!(is >> snap.field[k])) throw ConfigError("truncated ascii field payload");
    } else {
        throw ConfigError("unknown field mode: " + mode);
    }
    return snap;
}

FieldSnapshot read_field(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ConfigError("cannot open for reading: " + path);
    return read_field(is);
}

} // namespace chb
