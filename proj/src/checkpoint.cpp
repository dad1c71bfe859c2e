#include "mlctr/checkpoint.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mlctr/errors.hpp"

namespace mlctr {

namespace {

void write_matrix(std::ostream& out, const std::string& label,
                  const Eigen::MatrixXd& m) {
  out << "matrix " << label << ' ' << m.rows() << ' ' << m.cols() << '\n';
  char buf[64];
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      std::snprintf(buf, sizeof(buf), "%.17g", m(r, c));
      out << buf << (c + 1 < m.cols() ? " " : "");
    }
    out << '\n';
  }
}

Eigen::MatrixXd read_matrix(std::istream& in, const std::string& label) {
  std::string kw, got;
  Eigen::Index rows, cols;
  if (!(in >> kw >> got >> rows >> cols) || kw != "matrix" || got != label)
    throw ParseError("checkpoint: expected matrix '" + label + "'");
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c)
      if (!(in >> m(r, c)))
        throw ParseError("checkpoint: truncated matrix '" + label + "'");
  return m;
}

void write_net(std::ostream& out, const std::string& label,
               const EmbeddingNetwork& net) {
  out << "net " << label << ' ' << net.entities() << ' ' << net.rank() << ' '
      << net.depth() << '\n';
  write_matrix(out, label + ".base", net.base);
  for (int l = 0; l < net.depth(); ++l) {
    write_matrix(out, label + ".p" + std::to_string(l), net.p[l]);
    write_matrix(out, label + ".q" + std::to_string(l), net.q[l]);
  }
}

EmbeddingNetwork read_net(std::istream& in, const std::string& label,
                          const Activation& act) {
  std::string kw, got;
  int entities, rank, depth;
  if (!(in >> kw >> got >> entities >> rank >> depth) || kw != "net" || got != label)
    throw ParseError("checkpoint: expected net '" + label + "'");
  EmbeddingNetwork net;
  net.activation = act;
  net.base = read_matrix(in, label + ".base");
  if (net.base.rows() != entities || net.base.cols() != rank)
    throw ParseError("checkpoint: net '" + label + "' shape mismatch");
  net.p.resize(depth);
  net.q.resize(depth);
  for (int l = 0; l < depth; ++l) {
    net.p[l] = read_matrix(in, label + ".p" + std::to_string(l));
    net.q[l] = read_matrix(in, label + ".q" + std::to_string(l));
  }
  return net;
}

void write_head(std::ostream& out, const std::string& label, const MlpHead& h) {
  out << "head " << label << '\n';
  write_matrix(out, label + ".w1", h.w1);
  write_matrix(out, label + ".b1", h.b1);
  write_matrix(out, label + ".w2", h.w2);
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", h.b2);
  out << "scalar " << label << ".b2 " << buf << '\n';
}

MlpHead read_head(std::istream& in, const std::string& label,
                  const Activation& act) {
  std::string kw, got;
  if (!(in >> kw >> got) || kw != "head" || got != label)
    throw ParseError("checkpoint: expected head '" + label + "'");
  MlpHead h;
  h.activation = act;
  h.w1 = read_matrix(in, label + ".w1");
  Eigen::MatrixXd b1 = read_matrix(in, label + ".b1");
  Eigen::MatrixXd w2 = read_matrix(in, label + ".w2");
  if (b1.rows() != 1 || w2.cols() != 1)
    throw ParseError("checkpoint: head '" + label + "' vector shape mismatch");
  h.b1 = b1.row(0);
  h.w2 = w2.col(0);
  if (!(in >> kw >> got >> h.b2) || kw != "scalar" || got != label + ".b2")
    throw ParseError("checkpoint: expected scalar '" + label + ".b2'");
  return h;
}

void write_spec(std::ostream& out, const ModelSpec& spec) {
  char buf[64];
  out << "spec rank " << spec.rank << " layers " << spec.layers << " hidden "
      << spec.hidden << " activation " << spec.activation.name();
  std::snprintf(buf, sizeof(buf), "%.17g", spec.activation.elu_alpha);
  out << " elu_alpha " << buf;
  out << " readout " << (spec.readout == ReadoutKind::dot ? "dot" : "mlp")
      << " mlp_hidden " << spec.mlp_hidden;
  std::snprintf(buf, sizeof(buf), "%.17g", spec.lambda);
  out << " lambda " << buf << " seed " << spec.seed << " freeze_base "
      << (spec.freeze_base ? 1 : 0) << '\n';
}

ModelSpec read_spec(std::istream& in) {
  auto expect_key = [&](const char* key) {
    std::string kw;
    if (!(in >> kw) || kw != key)
      throw ParseError(std::string("checkpoint: expected '") + key + "'");
  };
  ModelSpec spec;
  expect_key("spec");
  expect_key("rank");
  in >> spec.rank;
  expect_key("layers");
  in >> spec.layers;
  expect_key("hidden");
  in >> spec.hidden;
  expect_key("activation");
  std::string act;
  in >> act;
  spec.activation = Activation::parse(act);
  expect_key("elu_alpha");
  in >> spec.activation.elu_alpha;
  expect_key("readout");
  std::string readout;
  in >> readout;
  if (readout == "dot")
    spec.readout = ReadoutKind::dot;
  else if (readout == "mlp")
    spec.readout = ReadoutKind::mlp;
  else
    throw ParseError("checkpoint: unknown readout '" + readout + "'");
  expect_key("mlp_hidden");
  in >> spec.mlp_hidden;
  expect_key("lambda");
  in >> spec.lambda;
  expect_key("seed");
  in >> spec.seed;
  expect_key("freeze_base");
  int fb;
  in >> fb;
  spec.freeze_base = fb != 0;
  if (!in) throw ParseError("checkpoint: truncated spec line");
  return spec;
}

void write_standardizer(std::ostream& out, const char* label,
                        const Standardizer& st) {
  char b1[64], b2[64];
  std::snprintf(b1, sizeof(b1), "%.17g", st.mean);
  std::snprintf(b2, sizeof(b2), "%.17g", st.stddev);
  out << "standardizer " << label << ' ' << b1 << ' ' << b2 << ' '
      << (st.degenerate ? 1 : 0) << '\n';
}

Standardizer read_standardizer(std::istream& in, const std::string& label) {
  std::string kw, got;
  Standardizer st;
  int degenerate;
  if (!(in >> kw >> got >> st.mean >> st.stddev >> degenerate) ||
      kw != "standardizer" || got != label)
    throw ParseError("checkpoint: expected standardizer '" + label + "'");
  st.degenerate = degenerate != 0;
  return st;
}

}  // namespace

void save_checkpoint(const Checkpoint& cp, const std::string& path) {
  std::ostringstream out;
  out << kCheckpointFormat << '\n';
  if (const auto* single = std::get_if<SingleModel>(&cp.model)) {
    out << "kind single\n";
    write_spec(out, single->spec);
    out << "dims " << single->dims[0] << ' ' << single->dims[1] << ' '
        << single->dims[2] << '\n';
    write_standardizer(out, "x", cp.std_x);
    write_net(out, "u", single->u);
    write_net(out, "v", single->v);
    write_net(out, "t", single->t);
    out << "heads " << (single->head ? 1 : 0) << '\n';
    if (single->head) write_head(out, "head_x", *single->head);
  } else {
    const auto& coupled = std::get<CoupledModel>(cp.model);
    out << "kind coupled\n";
    write_spec(out, coupled.spec);
    out << "dims " << coupled.dims[0] << ' ' << coupled.dims[1] << ' '
        << coupled.dims[2] << ' ' << coupled.dims[3] << '\n';
    write_standardizer(out, "x", cp.std_x);
    write_standardizer(out, "y", cp.std_y);
    write_net(out, "u", coupled.u);
    write_net(out, "v", coupled.v);
    write_net(out, "t", coupled.t);
    write_net(out, "w", coupled.w);
    out << "heads " << (coupled.head_x ? 2 : 0) << '\n';
    if (coupled.head_x) {
      write_head(out, "head_x", *coupled.head_x);
      write_head(out, "head_y", *coupled.head_y);
    }
  }
  out << "end\n";

  // Write-then-rename so readers never observe a half-written file.
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::trunc);
    if (!f) throw IoError("cannot write " + tmp);
    f << out.str();
    if (!f.flush()) throw IoError("write failed for " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move " + tmp + " to " + path + ": " + ec.message());
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);

  std::string tag;
  if (!std::getline(in, tag)) throw FormatError(path + ": empty checkpoint");
  if (!tag.empty() && tag.back() == '\r') tag.pop_back();
  if (tag != kCheckpointFormat)
    throw FormatError(path + ": unsupported format tag '" + tag + "'");

  std::string kw, kind;
  if (!(in >> kw >> kind) || kw != "kind" || (kind != "single" && kind != "coupled"))
    throw ParseError(path + ": bad kind line");

  Checkpoint cp;
  const ModelSpec spec = read_spec(in);

  if (kind == "single") {
    SingleModel m;
    m.spec = spec;
    if (!(in >> kw >> m.dims[0] >> m.dims[1] >> m.dims[2]) || kw != "dims")
      throw ParseError(path + ": bad dims line");
    cp.std_x = read_standardizer(in, "x");
    m.u = read_net(in, "u", spec.activation);
    m.v = read_net(in, "v", spec.activation);
    m.t = read_net(in, "t", spec.activation);
    int heads;
    if (!(in >> kw >> heads) || kw != "heads")
      throw ParseError(path + ": bad heads line");
    if (heads == 1) m.head = read_head(in, "head_x", spec.activation);
    cp.model = std::move(m);
  } else {
    CoupledModel m;
    m.spec = spec;
    if (!(in >> kw >> m.dims[0] >> m.dims[1] >> m.dims[2] >> m.dims[3]) ||
        kw != "dims")
      throw ParseError(path + ": bad dims line");
    cp.std_x = read_standardizer(in, "x");
    cp.std_y = read_standardizer(in, "y");
    m.u = read_net(in, "u", spec.activation);
    m.v = read_net(in, "v", spec.activation);
    m.t = read_net(in, "t", spec.activation);
    m.w = read_net(in, "w", spec.activation);
    int heads;
    if (!(in >> kw >> heads) || kw != "heads")
      throw ParseError(path + ": bad heads line");
    if (heads == 2) {
      m.head_x = read_head(in, "head_x", spec.activation);
      m.head_y = read_head(in, "head_y", spec.activation);
    }
    cp.model = std::move(m);
  }

  if (!(in >> kw) || kw != "end") throw ParseError(path + ": missing end marker");
  return cp;
}

}  // namespace mlctr
