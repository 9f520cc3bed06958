#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "orthoflow/grid.hpp"

namespace orthoflow {

namespace {

std::string fmt17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_header(std::ostream& os, const GridSpec& spec, int n, const char* phase,
                  int nodes) {
  os << "orthoflow-field v1\n";
  os << "geometry " << geometry_name(spec.geom) << "\n";
  os << "n " << n << "\n";
  os << "m_normal " << spec.m_normal << "\n";
  os << "m_tangent " << spec.m_tangent << "\n";
  os << "iface_pos " << fmt17(spec.iface_pos) << "\n";
  os << "R " << fmt17(spec.R) << " r_core " << fmt17(spec.r_core) << " r_iface "
     << fmt17(spec.r_iface) << "\n";
  os << "phase " << phase << "\n";
  os << "nodes " << nodes << "\n";
}

void expect_tok(std::istream& is, const char* tok) {
  std::string s;
  is >> s;
  if (s != tok) fail(Errc::ParseError, std::string("snapshot: expected '") + tok + "', got '" + s + "'");
}

struct Header {
  GridSpec spec;
  int n = 0;
  std::string phase;
  int nodes = 0;
};

Header read_header(std::istream& is, const std::string& path) {
  std::string line;
  if (!std::getline(is, line) || line != "orthoflow-field v1")
    fail(Errc::ParseError, path + ": not an orthoflow field snapshot");
  Header h;
  std::string name;
  expect_tok(is, "geometry");
  is >> name;
  h.spec.geom = geometry_from_name(name);
  expect_tok(is, "n");
  is >> h.n;
  expect_tok(is, "m_normal");
  is >> h.spec.m_normal;
  expect_tok(is, "m_tangent");
  is >> h.spec.m_tangent;
  expect_tok(is, "iface_pos");
  is >> h.spec.iface_pos;
  expect_tok(is, "R");
  is >> h.spec.R;
  expect_tok(is, "r_core");
  is >> h.spec.r_core;
  expect_tok(is, "r_iface");
  is >> h.spec.r_iface;
  expect_tok(is, "phase");
  is >> h.phase;
  expect_tok(is, "nodes");
  is >> h.nodes;
  if (!is) fail(Errc::ParseError, path + ": truncated header");
  return h;
}

void read_rows(std::istream& is, const std::string& path, int rows, int cols, double* out) {
  for (int i = 0; i < rows; ++i) {
    for (int k = 0; k < cols; ++k) {
      if (!(is >> out[static_cast<std::size_t>(i) * cols + k]))
        fail(Errc::ParseError, path + ": bad value at node " + std::to_string(i) +
                                   ", entry " + std::to_string(k));
    }
  }
}

} // namespace

void write_field_snapshot(const std::string& path, const PairedField& f, Phase phase) {
  std::ofstream os(path);
  if (!os) fail(Errc::ParseError, "cannot open for write: " + path);
  const MatrixField& mf = f.phase(phase);
  write_header(os, f.grid->spec, f.n, phase == Phase::Plus ? "plus" : "minus", mf.num_nodes);
  const int bs = f.n * f.n;
  for (int i = 0; i < mf.num_nodes; ++i) {
    const double* row = mf.at(i);
    for (int k = 0; k < bs; ++k) os << (k ? " " : "") << fmt17(row[k]);
    os << "\n";
  }
}

void write_axes_snapshot(const std::string& path, const PairedField& f) {
  std::ofstream os(path);
  if (!os) fail(Errc::ParseError, "cannot open for write: " + path);
  write_header(os, f.grid->spec, f.n, "axes", f.grid->num_iface);
  for (int p = 0; p < f.grid->num_iface; ++p) {
    const double* ax = f.axis(p);
    for (int k = 0; k < f.n; ++k) os << (k ? " " : "") << fmt17(ax[k]);
    os << "\n";
  }
}

void write_paired_snapshot(const std::string& prefix, const PairedField& f) {
  write_field_snapshot(prefix + "_plus.txt", f, Phase::Plus);
  write_field_snapshot(prefix + "_minus.txt", f, Phase::Minus);
  write_axes_snapshot(prefix + "_axes.txt", f);
}

PairedField read_paired_snapshot(const std::string& prefix, const GridPtr& grid) {
  PairedField f;
  int n = 0;
  for (const char* part : {"plus", "minus", "axes"}) {
    const std::string path = prefix + "_" + part + ".txt";
    std::ifstream is(path);
    if (!is) fail(Errc::ParseError, "cannot open: " + path);
    Header h = read_header(is, path);
    if (!(h.spec == grid->spec))
      fail(Errc::ParseError, path + ": snapshot grid does not match the target grid");
    if (h.phase != part) fail(Errc::ParseError, path + ": wrong phase section");
    if (n == 0) {
      n = h.n;
      f = make_paired_field(grid, n);
    } else if (h.n != n) {
      fail(Errc::ParseError, path + ": inconsistent matrix dimension across files");
    }
    if (std::strcmp(part, "plus") == 0) {
      if (h.nodes != grid->plus.num_nodes) fail(Errc::ParseError, path + ": node count mismatch");
      read_rows(is, path, h.nodes, n * n, f.plus.a.data());
    } else if (std::strcmp(part, "minus") == 0) {
      if (h.nodes != grid->minus.num_nodes) fail(Errc::ParseError, path + ": node count mismatch");
      read_rows(is, path, h.nodes, n * n, f.minus.a.data());
    } else {
      if (h.nodes != grid->num_iface) fail(Errc::ParseError, path + ": pair count mismatch");
      read_rows(is, path, h.nodes, n, f.axes.data());
    }
  }
  if (max_orth_residual(f) > 1e-8)
    fail(Errc::NotOrthogonal, prefix + ": field is not manifold-valid");
  if (max_pair_residual(f) > 1e-8)
    fail(Errc::InvalidArgument, prefix + ": interface pairs are not minimal");
  return f;
}

} // namespace orthoflow
