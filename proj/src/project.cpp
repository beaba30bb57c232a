#include "conceptlens/error.hpp"
#include "conceptlens/factorize.hpp"
#include "factorize_detail.hpp"

namespace conceptlens {

Matrix project(const ConceptDictionary& dict, const Matrix& reps) {
  require(reps.rows() == dict.atoms.rows(), ErrorCode::parameter,
          "project: representation dimension " + std::to_string(reps.rows()) + " does not match dictionary B=" +
              std::to_string(dict.atoms.rows()));
  require(reps.allFinite(), ErrorCode::data, "project: representations contain non-finite values");
  const Matrix& atoms = dict.atoms;
  switch (dict.method) {
    case Method::semi_nmf: {
      for (Eigen::Index k = 0; k < atoms.cols(); ++k)
        require(atoms.col(k).squaredNorm() > 0.0, ErrorCode::parameter,
                "project: dictionary column " + std::to_string(k) + " is zero");
      const Matrix gram = atoms.transpose() * atoms;
      const Matrix corr = atoms.transpose() * reps;
      Matrix codes(atoms.cols(), reps.cols());
      for (Eigen::Index j = 0; j < reps.cols(); ++j)
        codes.col(j) = detail::solve_nnlasso(gram, corr.col(j), dict.lambda, reps.col(j).norm(), CodeOptions{});
      return codes;
    }
    case Method::pca: {
      require(dict.mean.has_value(), ErrorCode::validation, "project: pca dictionary lacks mean");
      return atoms.transpose() * (reps.colwise() - *dict.mean);
    }
    case Method::kmeans:
    case Method::simple:
      return detail::one_hot_nearest(atoms, reps);
  }
  fail(ErrorCode::parameter, "project: unknown method");
}

ActivationMatrix project(const ConceptDictionary& dict, const Matrix& reps, std::vector<std::string> sample_ids) {
  require(sample_ids.size() == static_cast<std::size_t>(reps.cols()), ErrorCode::parameter,
          "project: sample_ids count does not match columns");
  ActivationMatrix out;
  out.values = project(dict, reps);
  out.sample_ids = std::move(sample_ids);
  out.dictionary_id = dict.id;
  out.method = dict.method;
  return out;
}

}  // namespace conceptlens
