#include "matchgan/imageio.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>
#include <sys/stat.h>

#ifdef MATCHGAN_HAVE_JPEG
#include <csetjmp>
#include <cstdio>
#include <jpeglib.h>
#endif

namespace matchgan {

bool file_exists(const std::string& path) {
  struct stat st {};
  return ::stat(path.c_str(), &st) == 0;
}

namespace {

void put_u32(std::vector<uint8_t>& v, uint32_t x) {
  v.push_back(uint8_t(x >> 24));
  v.push_back(uint8_t(x >> 16));
  v.push_back(uint8_t(x >> 8));
  v.push_back(uint8_t(x));
}

uint32_t get_u32(const uint8_t* p) {
  return (uint32_t(p[0]) << 24) | (uint32_t(p[1]) << 16) |
         (uint32_t(p[2]) << 8) | uint32_t(p[3]);
}

void write_chunk(std::ofstream& out, const char type[4],
                 const std::vector<uint8_t>& payload) {
  std::vector<uint8_t> hdr;
  put_u32(hdr, static_cast<uint32_t>(payload.size()));
  out.write(reinterpret_cast<const char*>(hdr.data()), 4);
  out.write(type, 4);
  if (!payload.empty())
    out.write(reinterpret_cast<const char*>(payload.data()),
              static_cast<std::streamsize>(payload.size()));
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, reinterpret_cast<const Bytef*>(type), 4);
  if (!payload.empty())
    crc = crc32(crc, payload.data(), static_cast<uInt>(payload.size()));
  std::vector<uint8_t> crcb;
  put_u32(crcb, static_cast<uint32_t>(crc));
  out.write(reinterpret_cast<const char*>(crcb.data()), 4);
}

int paeth(int a, int b, int c) {
  const int p = a + b - c;
  const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
}

}  // namespace

void write_png(const std::string& path, const RawImage& img) {
  require(img.channels == 1 || img.channels == 3, ErrorKind::InvalidArgument,
          "write_png: channels must be 1 or 3");
  require(img.width > 0 && img.height > 0, ErrorKind::InvalidArgument,
          "write_png: empty image");
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorKind::IoError, "cannot open for write: " + path);

  static const uint8_t sig[8] = {137, 80, 78, 71, 13, 10, 26, 10};
  out.write(reinterpret_cast<const char*>(sig), 8);

  std::vector<uint8_t> ihdr;
  put_u32(ihdr, static_cast<uint32_t>(img.width));
  put_u32(ihdr, static_cast<uint32_t>(img.height));
  ihdr.push_back(8);                                  // bit depth
  ihdr.push_back(img.channels == 3 ? 2 : 0);          // colour type
  ihdr.push_back(0);                                  // compression
  ihdr.push_back(0);                                  // filter
  ihdr.push_back(0);                                  // no interlace
  write_chunk(out, "IHDR", ihdr);

  const int64_t rowbytes = img.width * img.channels;
  std::vector<uint8_t> raw;
  raw.reserve(static_cast<size_t>((rowbytes + 1) * img.height));
  for (int64_t y = 0; y < img.height; ++y) {
    raw.push_back(0);  // filter: none
    raw.insert(raw.end(), img.data.begin() + y * rowbytes,
               img.data.begin() + (y + 1) * rowbytes);
  }
  uLongf bound = compressBound(static_cast<uLong>(raw.size()));
  std::vector<uint8_t> comp(bound);
  require(compress2(comp.data(), &bound, raw.data(),
                    static_cast<uLong>(raw.size()), 6) == Z_OK,
          ErrorKind::IoError, "png deflate failed");
  comp.resize(bound);
  write_chunk(out, "IDAT", comp);
  write_chunk(out, "IEND", {});
}

namespace {

RawImage read_png(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorKind::MissingFile, "image not found: " + path);
  std::vector<uint8_t> buf((std::istreambuf_iterator<char>(in)),
                           std::istreambuf_iterator<char>());
  require(buf.size() > 8 && buf[0] == 137 && buf[1] == 'P', ErrorKind::IoError,
          "not a png: " + path);

  int64_t w = 0, h = 0, channels = 0, file_ch = 0;
  std::vector<uint8_t> idat;
  size_t pos = 8;
  while (pos + 8 <= buf.size()) {
    const uint32_t len = get_u32(&buf[pos]);
    const char* type = reinterpret_cast<const char*>(&buf[pos + 4]);
    const uint8_t* payload = &buf[pos + 8];
    if (std::memcmp(type, "IHDR", 4) == 0) {
      w = get_u32(payload);
      h = get_u32(payload + 4);
      const int depth = payload[8], colour = payload[9], interlace = payload[12];
      require(depth == 8, ErrorKind::IoError, "png: only bit depth 8");
      require(interlace == 0, ErrorKind::IoError, "png: interlaced unsupported");
      switch (colour) {
        case 0: file_ch = 1; channels = 1; break;
        case 2: file_ch = 3; channels = 3; break;
        case 6: file_ch = 4; channels = 3; break;  // drop alpha
        default:
          fail(ErrorKind::IoError, "png: unsupported colour type");
      }
    } else if (std::memcmp(type, "IDAT", 4) == 0) {
      idat.insert(idat.end(), payload, payload + len);
    } else if (std::memcmp(type, "IEND", 4) == 0) {
      break;
    }
    pos += 8ull + len + 4ull;
  }
  require(w > 0 && h > 0 && !idat.empty(), ErrorKind::IoError,
          "png: missing IHDR/IDAT");

  const int64_t rowbytes = w * file_ch;
  std::vector<uint8_t> raw(static_cast<size_t>((rowbytes + 1) * h));
  uLongf rawlen = static_cast<uLongf>(raw.size());
  require(uncompress(raw.data(), &rawlen, idat.data(),
                     static_cast<uLong>(idat.size())) == Z_OK &&
              rawlen == raw.size(),
          ErrorKind::IoError, "png inflate failed");

  // undo per-row filters
  const int64_t bpp = file_ch;
  std::vector<uint8_t> img(static_cast<size_t>(rowbytes * h));
  for (int64_t y = 0; y < h; ++y) {
    const uint8_t filter = raw[static_cast<size_t>(y * (rowbytes + 1))];
    const uint8_t* src = &raw[static_cast<size_t>(y * (rowbytes + 1) + 1)];
    uint8_t* dst = &img[static_cast<size_t>(y * rowbytes)];
    const uint8_t* up = y > 0 ? &img[static_cast<size_t>((y - 1) * rowbytes)]
                              : nullptr;
    for (int64_t x = 0; x < rowbytes; ++x) {
      const int a = x >= bpp ? dst[x - bpp] : 0;
      const int b = up ? up[x] : 0;
      const int c = (up && x >= bpp) ? up[x - bpp] : 0;
      int v = src[x];
      switch (filter) {
        case 0: break;
        case 1: v += a; break;
        case 2: v += b; break;
        case 3: v += (a + b) / 2; break;
        case 4: v += paeth(a, b, c); break;
        default:
          fail(ErrorKind::IoError, "png: bad filter type");
      }
      dst[x] = static_cast<uint8_t>(v);
    }
  }

  RawImage out;
  out.width = w;
  out.height = h;
  out.channels = channels;
  out.data.resize(static_cast<size_t>(w * h * channels));
  if (file_ch == channels) {
    out.data = std::move(img);
  } else {  // RGBA -> RGB
    for (int64_t i = 0; i < w * h; ++i)
      for (int64_t c = 0; c < 3; ++c)
        out.data[static_cast<size_t>(i * 3 + c)] =
            img[static_cast<size_t>(i * 4 + c)];
  }
  return out;
}

RawImage read_pnm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorKind::MissingFile, "image not found: " + path);
  std::string magic;
  in >> magic;
  require(magic == "P5" || magic == "P6", ErrorKind::IoError,
          "pnm: only binary P5/P6");
  int64_t w, h, maxv;
  in >> w >> h >> maxv;
  require(maxv == 255, ErrorKind::IoError, "pnm: only 8-bit");
  in.get();
  RawImage out;
  out.width = w;
  out.height = h;
  out.channels = magic == "P6" ? 3 : 1;
  out.data.resize(static_cast<size_t>(w * h * out.channels));
  in.read(reinterpret_cast<char*>(out.data.data()),
          static_cast<std::streamsize>(out.data.size()));
  require(in.gcount() == static_cast<std::streamsize>(out.data.size()),
          ErrorKind::IoError, "pnm: truncated");
  return out;
}

#ifdef MATCHGAN_HAVE_JPEG
struct JpegErr {
  jpeg_error_mgr mgr;
  std::jmp_buf jb;
};

RawImage read_jpeg(const std::string& path) {
  FILE* f = std::fopen(path.c_str(), "rb");
  require(f != nullptr, ErrorKind::MissingFile, "image not found: " + path);
  jpeg_decompress_struct cinfo{};
  JpegErr jerr{};
  cinfo.err = jpeg_std_error(&jerr.mgr);
  jerr.mgr.error_exit = [](j_common_ptr ci) {
    std::longjmp(reinterpret_cast<JpegErr*>(ci->err)->jb, 1);
  };
  RawImage out;
  if (setjmp(jerr.jb)) {
    jpeg_destroy_decompress(&cinfo);
    std::fclose(f);
    fail(ErrorKind::IoError, "jpeg decode failed: " + path);
  }
  jpeg_create_decompress(&cinfo);
  jpeg_stdio_src(&cinfo, f);
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);
  out.width = cinfo.output_width;
  out.height = cinfo.output_height;
  out.channels = 3;
  out.data.resize(static_cast<size_t>(out.width * out.height * 3));
  while (cinfo.output_scanline < cinfo.output_height) {
    uint8_t* row = &out.data[static_cast<size_t>(cinfo.output_scanline *
                                                 out.width * 3)];
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  std::fclose(f);
  return out;
}
#endif

bool ends_with(const std::string& s, const std::string& suf) {
  return s.size() >= suf.size() &&
         s.compare(s.size() - suf.size(), suf.size(), suf) == 0;
}

}  // namespace

RawImage read_image(const std::string& path) {
  std::string lower = path;
  for (auto& c : lower) c = static_cast<char>(std::tolower(c));
  if (ends_with(lower, ".png")) return read_png(path);
  if (ends_with(lower, ".pgm") || ends_with(lower, ".ppm"))
    return read_pnm(path);
#ifdef MATCHGAN_HAVE_JPEG
  if (ends_with(lower, ".jpg") || ends_with(lower, ".jpeg"))
    return read_jpeg(path);
#endif
  fail(ErrorKind::IoError, "unsupported image format: " + path);
}

}  // namespace matchgan
