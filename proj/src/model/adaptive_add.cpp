#include "zachvit/errors.h"
#include "zachvit/model.h"

namespace zachvit {

Tensor AdaptiveAdd::operator()(const Tensor& x, const Tensor& y) {
  if (x.rank() != 2 || y.rank() != 2 || x.rows() != y.rows()) {
    throw ShapeError("adaptive_add(" + site_ + "): token counts differ, " +
                     shape_string(x.shape()) + " vs " + shape_string(y.shape()));
  }
  if (x.cols() == y.cols()) return add(x, y);
  if (!weight_) {
    weight_ = &store_->get_or_create(site_ + "/proj/W", {x.cols(), y.cols()}, Init::glorot_uniform);
    bias_ = &store_->get_or_create(site_ + "/proj/b", {y.cols()}, Init::zeros);
  }
  if (weight_->shape() != Shape{x.cols(), y.cols()}) {
    throw ShapeError("adaptive_add(" + site_ + "): projection is " +
                     shape_string(weight_->shape()) + " but inputs need " +
                     std::to_string(x.cols()) + "x" + std::to_string(y.cols()));
  }
  return add(dense(x, weight_->use(), bias_->use()), y);
}

}  // namespace zachvit
