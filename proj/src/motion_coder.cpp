#include "bmkn/motion_coder.hpp"

#include "bmkn/bytes.hpp"

namespace bmkn {

size_t p_vector_length(const KeyNodeSet& nodes, const CombinationMask& mask) {
  size_t n = 0;
  for (NodeType t : nodes.types) {
    if (t == NodeType::Rigid) {
      n += 3;  // rigid nodes always carry R
    } else {
      if (mask.r_on) n += 3;
      if (mask.s_on) n += 3;
      if (mask.h_on) n += 3;
    }
  }
  return n;
}

namespace {

// P = [R', S', H'] concatenated across nodes in index order.
std::vector<double> build_p_vector(const NodeTransforms& t,
                                   const CombinationMask& mask) {
  std::vector<double> p;
  for (size_t j = 0; j < t.params.size(); ++j) {
    if (t.types[j] == NodeType::Rigid || mask.r_on) {
      for (int c = 0; c < 3; ++c) p.push_back(t.params[j].euler[c]);
    }
  }
  for (size_t j = 0; j < t.params.size(); ++j) {
    if (t.types[j] == NodeType::Affine && mask.s_on) {
      for (int c = 0; c < 3; ++c) p.push_back(t.params[j].scale_resid[c]);
    }
  }
  for (size_t j = 0; j < t.params.size(); ++j) {
    if (t.types[j] == NodeType::Affine && mask.h_on) {
      for (int c = 0; c < 3; ++c) p.push_back(t.params[j].shear[c]);
    }
  }
  return p;
}

void scatter_p_vector(const std::vector<double>& p, NodeTransforms& t,
                      const CombinationMask& mask) {
  size_t k = 0;
  for (size_t j = 0; j < t.params.size(); ++j) {
    if (t.types[j] == NodeType::Rigid || mask.r_on) {
      for (int c = 0; c < 3; ++c) t.params[j].euler[c] = p.at(k++);
    }
  }
  for (size_t j = 0; j < t.params.size(); ++j) {
    if (t.types[j] == NodeType::Affine && mask.s_on) {
      for (int c = 0; c < 3; ++c) t.params[j].scale_resid[c] = p.at(k++);
    }
  }
  for (size_t j = 0; j < t.params.size(); ++j) {
    if (t.types[j] == NodeType::Affine && mask.h_on) {
      for (int c = 0; c < 3; ++c) t.params[j].shear[c] = p.at(k++);
    }
  }
}

std::vector<double> flatten(const std::vector<Vec3>& v) {
  std::vector<double> out;
  out.reserve(3 * v.size());
  for (const Vec3& x : v) {
    out.push_back(x.x());
    out.push_back(x.y());
    out.push_back(x.z());
  }
  return out;
}

}  // namespace

CodedMotion code_motion(const NodeTransforms& fitted, const KeyNodeSet& nodes,
                        const InfluenceGraph& graph, const CombinationMask& mask,
                        const MotionContext& ctx) {
  nodes.check_aligned();
  if (fitted.params.size() != nodes.size()) {
    throw AlignmentError("fitted transforms not aligned with node set");
  }

  CodedMotion out;
  out.decoded = NodeTransforms::identity(nodes, mask);

  // Translations.
  std::vector<Vec3> trans(nodes.size());
  for (size_t j = 0; j < nodes.size(); ++j) {
    trans[j] = fitted.params[j].translation;
  }
  ByteWriter tw;
  tw.u8(uint8_t(ctx.mode));
  switch (ctx.mode) {
    case TMode::Direct: {
      const std::vector<double> flat = flatten(trans);
      out.t_model = fit_model(flat, ctx.qstep_t);
      const BitPayload bits = encode_stream(flat, out.t_model);
      tw.model(out.t_model);
      tw.payload(bits);
      out.decoded_t.resize(nodes.size());
      for (size_t j = 0; j < nodes.size(); ++j) {
        for (int c = 0; c < 3; ++c) {
          out.decoded_t[j][c] = dequantize(
              quantize(trans[j][c], out.t_model.qstep), out.t_model.qstep);
        }
      }
      break;
    }
    case TMode::Spatial: {
      const TraversalPlan plan = plan_traversal(nodes, graph);
      SpatialCoded coded = spatial_encode(trans, plan, ctx.qstep_t);
      out.t_model = coded.model;
      out.decoded_t = std::move(coded.decoded);
      tw.model(coded.model);
      tw.payload(coded.bits);
      break;
    }
    case TMode::SpatioTemporal: {
      SpatioTemporalCoded coded = spatiotemporal_encode(
          trans, *ctx.prev_decoded_t, nodes.labels, ctx.prev_t_model,
          ctx.qstep_t);
      out.t_model = coded.resid_model;
      out.decoded_t = std::move(coded.decoded);
      tw.payload(coded.delta_bits);
      tw.model(coded.resid_model);
      tw.payload(coded.resid_bits);
      break;
    }
  }
  out.t_section = tw.take();

  // Concatenated rotation/scale/shear residuals.
  ByteWriter pw;
  const std::vector<double> pvec = build_p_vector(fitted, mask);
  std::vector<double> pdec(pvec.size(), 0.0);
  if (!pvec.empty()) {
    const CauchyModel pmodel = fit_model(pvec, ctx.qstep_p);
    const BitPayload bits = encode_stream(pvec, pmodel);
    pw.model(pmodel);
    pw.payload(bits);
    for (size_t k = 0; k < pvec.size(); ++k) {
      pdec[k] = dequantize(quantize(pvec[k], pmodel.qstep), pmodel.qstep);
    }
  }
  out.p_section = pw.take();

  scatter_p_vector(pdec, out.decoded, mask);
  for (size_t j = 0; j < nodes.size(); ++j) {
    out.decoded.params[j].translation = out.decoded_t[j];
    out.decoded.params[j] =
        mask_params(out.decoded.params[j], out.decoded.mask_for(j));
  }
  return out;
}

DecodedMotion decode_motion(ByteReader& reader, const KeyNodeSet& nodes,
                            const InfluenceGraph& graph,
                            const CombinationMask& mask,
                            const MotionContext& ctx) {
  DecodedMotion out;
  out.transforms = NodeTransforms::identity(nodes, mask);

  const TMode mode = TMode(reader.u8());
  switch (mode) {
    case TMode::Direct: {
      const CauchyModel model = reader.model();
      const BitPayload bits = reader.payload();
      const std::vector<double> flat =
          decode_stream(bits, model, 3 * nodes.size());
      out.decoded_t.resize(nodes.size());
      for (size_t j = 0; j < nodes.size(); ++j) {
        out.decoded_t[j] = Vec3(flat[3 * j], flat[3 * j + 1], flat[3 * j + 2]);
      }
      out.t_model = model;
      break;
    }
    case TMode::Spatial: {
      const CauchyModel model = reader.model();
      const BitPayload bits = reader.payload();
      const TraversalPlan plan = plan_traversal(nodes, graph);
      out.decoded_t = spatial_decode(bits, model, plan);
      out.t_model = model;
      break;
    }
    case TMode::SpatioTemporal: {
      const BitPayload delta_bits = reader.payload();
      const CauchyModel resid_model = reader.model();
      const BitPayload resid_bits = reader.payload();
      if (!ctx.prev_decoded_t) {
        throw MissingPreviousModel("no previous translations for this frame");
      }
      out.decoded_t = spatiotemporal_decode(delta_bits, resid_bits,
                                            ctx.prev_t_model, resid_model,
                                            *ctx.prev_decoded_t, nodes.labels);
      out.t_model = resid_model;
      break;
    }
    default:
      throw CorruptBlock("unknown translation coding mode");
  }

  const size_t plen = p_vector_length(nodes, mask);
  std::vector<double> pdec(plen, 0.0);
  if (plen > 0) {
    const CauchyModel pmodel = reader.model();
    const BitPayload bits = reader.payload();
    pdec = decode_stream(bits, pmodel, plen);
  }
  scatter_p_vector(pdec, out.transforms, mask);
  for (size_t j = 0; j < nodes.size(); ++j) {
    out.transforms.params[j].translation = out.decoded_t[j];
    out.transforms.params[j] =
        mask_params(out.transforms.params[j], out.transforms.mask_for(j));
  }
  return out;
}

}  // namespace bmkn
