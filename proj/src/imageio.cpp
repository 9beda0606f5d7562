#include "signflow/imageio.hpp"

#include <algorithm>
#include <cmath>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "signflow/errors.hpp"

namespace signflow::imageio {

prep::ImageTensor decode(const std::filesystem::path& file, int expect_channels) {
  int flag = cv::IMREAD_UNCHANGED;
  if (expect_channels == 1) flag = cv::IMREAD_GRAYSCALE;
  if (expect_channels == 3) flag = cv::IMREAD_COLOR;
  cv::Mat mat = cv::imread(file.string(), flag);
  if (mat.empty()) throw InvalidImageError("cannot decode image: " + file.string());

  if (mat.channels() == 4) cv::cvtColor(mat, mat, cv::COLOR_BGRA2BGR);
  if (mat.channels() == 3) cv::cvtColor(mat, mat, cv::COLOR_BGR2RGB);
  if (mat.depth() != CV_8U) mat.convertTo(mat, CV_8U);

  prep::ImageTensor img(mat.rows, mat.cols, mat.channels());
  for (int y = 0; y < mat.rows; ++y) {
    const uchar* row = mat.ptr<uchar>(y);
    for (int x = 0; x < mat.cols * mat.channels(); ++x) {
      img.data[static_cast<std::size_t>(y) * mat.cols * mat.channels() + x] = row[x];
    }
  }
  return img;
}

void encode(const prep::ImageTensor& img, const std::filesystem::path& file) {
  if (img.channels != 1 && img.channels != 3) {
    throw InvalidImageError("encode expects 1 or 3 channels");
  }
  cv::Mat mat(img.height, img.width, img.channels == 1 ? CV_8UC1 : CV_8UC3);
  for (int y = 0; y < img.height; ++y) {
    uchar* row = mat.ptr<uchar>(y);
    for (int x = 0; x < img.width; ++x) {
      for (int c = 0; c < img.channels; ++c) {
        const double v = std::clamp(img.at(y, x, c), 0.0, 255.0);
        // OpenCV stores BGR
        const int dst_c = img.channels == 3 ? 2 - c : 0;
        row[x * img.channels + dst_c] = static_cast<uchar>(std::lround(v));
      }
    }
  }
  if (!cv::imwrite(file.string(), mat)) {
    throw IoError("cannot write image: " + file.string());
  }
}

void draw_text(prep::ImageTensor& img, const std::string& text, int x, int y, double scale,
               const std::array<double, 3>& rgb) {
  if (img.channels != 3) throw InvalidImageError("draw_text expects an RGB tensor");
  // Drawing primitives want 8-bit images; round-trip through one. The tensor
  // stays RGB throughout, so no BGR swap here.
  cv::Mat mat(img.height, img.width, CV_8UC3);
  for (int yy = 0; yy < img.height; ++yy) {
    uchar* row = mat.ptr<uchar>(yy);
    for (int xx = 0; xx < img.width * 3; ++xx) {
      row[xx] = static_cast<uchar>(
          std::lround(std::clamp(img.data[static_cast<std::size_t>(yy) * img.width * 3 + xx],
                                 0.0, 255.0)));
    }
  }
  cv::putText(mat, text, {x, y}, cv::FONT_HERSHEY_SIMPLEX, scale,
              cv::Scalar(rgb[0], rgb[1], rgb[2]), 1, cv::LINE_AA);
  for (int yy = 0; yy < img.height; ++yy) {
    const uchar* row = mat.ptr<uchar>(yy);
    for (int xx = 0; xx < img.width * 3; ++xx) {
      img.data[static_cast<std::size_t>(yy) * img.width * 3 + xx] = row[xx];
    }
  }
}

}  // namespace signflow::imageio
