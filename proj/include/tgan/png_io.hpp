#ifndef TGAN_PNG_IO_HPP
#define TGAN_PNG_IO_HPP

#include <cstdint>
#include <string>
#include <vector>

namespace tgan {

// 8-bit grayscale image, row-major.
struct ImageU8 {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> pixels;

    bool operator==(const ImageU8&) const = default;
};

void write_png_gray8(const std::string& path, const ImageU8& img);
ImageU8 read_png_gray8(const std::string& path);

} // namespace tgan

#endif
