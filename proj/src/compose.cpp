#include "mlstab/compose.hpp"

#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

namespace mlstab {

namespace {

struct SignalRef {
  int part = -1;
  int local_index = -1;
};

}  // namespace

Cpn1Model compose(const std::vector<const Cpn1Model*>& models,
                  const std::vector<Link>& links) {
  if (models.empty()) {
    throw std::invalid_argument("compose needs at least one model");
  }

  // Global name registry; also records where each signal lives.
  std::unordered_map<std::string, SignalRef> registry;
  for (std::size_t part = 0; part < models.size(); ++part) {
    const auto& names = models[part]->partition().names;
    for (std::size_t i = 0; i < names.size(); ++i) {
      const auto [it, inserted] = registry.emplace(
          names[i], SignalRef{static_cast<int>(part), static_cast<int>(i)});
      (void)it;
      if (!inserted) {
        throw std::invalid_argument("compose: signal name '" + names[i] +
                                    "' appears in more than one part");
      }
    }
  }

  // Validate links; mark which inputs get reclassified.
  std::unordered_set<std::string> linked_inputs;
  for (const auto& link : links) {
    const auto src = registry.find(link.source);
    if (src == registry.end()) {
      throw std::invalid_argument("compose: unknown link source '" +
                                  link.source + "'");
    }
    const auto dst = registry.find(link.target);
    if (dst == registry.end()) {
      throw std::invalid_argument("compose: unknown link target '" +
                                  link.target + "'");
    }
    const auto& dst_part = models[dst->second.part]->partition();
    const int local = dst->second.local_index;
    if (local < dst_part.u_begin() || local >= dst_part.y_begin()) {
      throw std::invalid_argument("compose: link target '" + link.target +
                                  "' is not an input");
    }
    if (!linked_inputs.insert(link.target).second) {
      throw std::invalid_argument("compose: input '" + link.target +
                                  "' is linked twice");
    }
  }

  // Composite partition: parts stacked per block, linked inputs moved to the
  // tail of the algebraic block (in link order).
  SignalPartition composite;
  for (const auto* model : models) {
    const auto& part = model->partition();
    composite.n += part.n;
    composite.m += part.m;
    composite.p += part.p;
    composite.q += part.q;
  }
  composite.m -= static_cast<int>(links.size());
  composite.q += static_cast<int>(links.size());

  composite.names.resize(composite.n_v());
  std::vector<std::vector<int>> index_map(models.size());

  int zdot_cursor = composite.zdot_begin();
  int z_cursor = composite.z_begin();
  int u_cursor = composite.u_begin();
  int y_cursor = composite.y_begin();
  int alpha_cursor = composite.alpha_begin();

  for (std::size_t pi = 0; pi < models.size(); ++pi) {
    const auto& part = models[pi]->partition();
    index_map[pi].assign(part.n_v(), -1);
    for (int i = 0; i < part.n; ++i) {
      index_map[pi][i] = zdot_cursor;
      composite.names[zdot_cursor++] = part.names[i];
      index_map[pi][part.z_begin() + i] = z_cursor;
      composite.names[z_cursor++] = part.names[part.z_begin() + i];
    }
    for (int i = 0; i < part.m; ++i) {
      const int local = part.u_begin() + i;
      if (linked_inputs.count(part.names[local])) continue;  // placed later
      index_map[pi][local] = u_cursor;
      composite.names[u_cursor++] = part.names[local];
    }
    for (int i = 0; i < part.p; ++i) {
      const int local = part.y_begin() + i;
      index_map[pi][local] = y_cursor;
      composite.names[y_cursor++] = part.names[local];
    }
    for (int i = 0; i < part.q; ++i) {
      const int local = part.alpha_begin() + i;
      index_map[pi][local] = alpha_cursor;
      composite.names[alpha_cursor++] = part.names[local];
    }
  }
  for (const auto& link : links) {
    const auto dst = registry.at(link.target);
    index_map[dst.part][dst.local_index] = alpha_cursor;
    composite.names[alpha_cursor++] = link.target;
  }

  // Stack Phi block-diagonally, scatter S rows, and append link equations.
  int total_r = 0;
  int total_eq = 0;
  for (const auto* model : models) {
    total_r += model->r();
    total_eq += model->n_phi();
  }
  const int link_r = 2 * static_cast<int>(links.size());
  const int link_eq = static_cast<int>(links.size());

  Eigen::MatrixXd phi =
      Eigen::MatrixXd::Zero(total_eq + link_eq, total_r + link_r);
  Eigen::MatrixXd s_struct =
      Eigen::MatrixXd::Zero(composite.n_v(), total_r + link_r);

  std::vector<LiftPair> lifts;
  std::vector<std::string> equation_names;
  equation_names.reserve(total_eq + link_eq);

  int col_offset = 0;
  int row_offset = 0;
  for (std::size_t pi = 0; pi < models.size(); ++pi) {
    const auto* model = models[pi];
    phi.block(row_offset, col_offset, model->n_phi(), model->r()) =
        model->phi();
    for (int r = 0; r < model->r(); ++r) {
      for (const auto i : model->col_support(r)) {
        s_struct(index_map[pi][i], col_offset + r) = model->s_struct()(i, r);
      }
    }
    for (const auto& lift : model->lifts()) {
      lifts.push_back({index_map[pi][lift.cos_index],
                       index_map[pi][lift.sin_index]});
    }
    const auto& names = model->equation_names();
    for (int k = 0; k < model->n_phi(); ++k) {
      equation_names.push_back(names.empty() ? "part" + std::to_string(pi) +
                                                   ".eq" + std::to_string(k)
                                             : names[k]);
    }
    col_offset += model->r();
    row_offset += model->n_phi();
  }

  for (std::size_t li = 0; li < links.size(); ++li) {
    const auto src = registry.at(links[li].source);
    const auto dst = registry.at(links[li].target);
    const int src_index = index_map[src.part][src.local_index];
    const int dst_index = index_map[dst.part][dst.local_index];
    const int row = total_eq + static_cast<int>(li);
    s_struct(src_index, col_offset) = 1.0;
    phi(row, col_offset) = 1.0;
    ++col_offset;
    s_struct(dst_index, col_offset) = 1.0;
    phi(row, col_offset) = -1.0;
    ++col_offset;
    equation_names.push_back("link." + links[li].source + "->" +
                             links[li].target);
  }

  return Cpn1Model(std::move(composite), std::move(phi), std::move(s_struct),
                   std::move(lifts), std::move(equation_names));
}

Cpn1Model compose(const std::vector<Cpn1Model>& models,
                  const std::vector<Link>& links) {
  std::vector<const Cpn1Model*> pointers;
  pointers.reserve(models.size());
  for (const auto& model : models) pointers.push_back(&model);
  return compose(pointers, links);
}

}  // namespace mlstab
