#pragma once

#include <opencv2/core.hpp>

#include "fp/imgproc.hpp"

namespace fp::detail {

// Non-owning CV_64F header over the image buffer.
inline cv::Mat as_mat(GrayImage &img) {
  return cv::Mat(img.height(), img.width(), CV_64F, img.pixels().data());
}

inline cv::Mat as_mat(const GrayImage &img) {
  return cv::Mat(img.height(), img.width(), CV_64F,
                 const_cast<double *>(img.pixels().data()));
}

} // namespace fp::detail
