#pragma once

#include <tiffio.h>

#include <cstdint>
#include <cstring>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "wetseg/image.hpp"

namespace wetseg {

/// Georeferencing tags carried through from input rasters to outputs.
/// They are never interpreted, only copied.
struct GeoMetadata {
  std::vector<double> pixel_scale;           // ModelPixelScaleTag
  std::vector<double> tiepoints;             // ModelTiepointTag
  std::vector<double> transformation;        // ModelTransformationTag
  std::vector<std::uint16_t> key_directory;  // GeoKeyDirectoryTag
  std::vector<double> double_params;         // GeoDoubleParamsTag
  std::string ascii_params;                  // GeoASCIIParamsTag

  bool empty() const {
    return pixel_scale.empty() && tiepoints.empty() && transformation.empty() &&
           key_directory.empty() && double_params.empty() && ascii_params.empty();
  }
};

struct RasterData {
  int rows = 0;
  int cols = 0;
  std::vector<double> values;  // raw band values, row-major
  GeoMetadata geo;
};

namespace detail {

constexpr std::uint32_t kTagPixelScale = 33550;
constexpr std::uint32_t kTagTiepoints = 33922;
constexpr std::uint32_t kTagTransformation = 34264;
constexpr std::uint32_t kTagKeyDirectory = 34735;
constexpr std::uint32_t kTagDoubleParams = 34736;
constexpr std::uint32_t kTagAsciiParams = 34737;

inline TIFFExtendProc& parent_extender() {
  static TIFFExtendProc parent = nullptr;
  return parent;
}

inline void geotiff_tag_extender(TIFF* tif) {
  static const TIFFFieldInfo fields[] = {
      {kTagPixelScale, -1, -1, TIFF_DOUBLE, FIELD_CUSTOM, 1, 1,
       const_cast<char*>("GeoPixelScale")},
      {kTagTiepoints, -1, -1, TIFF_DOUBLE, FIELD_CUSTOM, 1, 1,
       const_cast<char*>("GeoTiePoints")},
      {kTagTransformation, -1, -1, TIFF_DOUBLE, FIELD_CUSTOM, 1, 1,
       const_cast<char*>("GeoTransformationMatrix")},
      {kTagKeyDirectory, -1, -1, TIFF_SHORT, FIELD_CUSTOM, 1, 1,
       const_cast<char*>("GeoKeyDirectory")},
      {kTagDoubleParams, -1, -1, TIFF_DOUBLE, FIELD_CUSTOM, 1, 1,
       const_cast<char*>("GeoDoubleParams")},
      {kTagAsciiParams, -1, -1, TIFF_ASCII, FIELD_CUSTOM, 1, 0,
       const_cast<char*>("GeoASCIIParams")},
  };
  TIFFMergeFieldInfo(tif, fields, sizeof(fields) / sizeof(fields[0]));
  if (parent_extender()) parent_extender()(tif);
}

inline void register_geotiff_tags() {
  static std::once_flag once;
  std::call_once(once, [] {
    parent_extender() = TIFFSetTagExtender(geotiff_tag_extender);
    TIFFSetWarningHandler(nullptr);  // unknown-tag warnings are expected noise
  });
}

struct TiffCloser {
  void operator()(TIFF* t) const {
    if (t) TIFFClose(t);
  }
};
using TiffPtr = std::unique_ptr<TIFF, TiffCloser>;

template <typename T>
void convert_row(const void* src, double* dst, int n) {
  const T* s = static_cast<const T*>(src);
  for (int i = 0; i < n; ++i) dst[i] = static_cast<double>(s[i]);
}

inline void convert_samples(const void* buf, double* dst, int n, std::uint16_t format,
                            std::uint16_t bits) {
  switch (format) {
    case SAMPLEFORMAT_IEEEFP:
      if (bits == 32)
        convert_row<float>(buf, dst, n);
      else if (bits == 64)
        convert_row<double>(buf, dst, n);
      else
        fail("geotiff: unsupported float bit depth");
      break;
    case SAMPLEFORMAT_INT:
      if (bits == 8)
        convert_row<std::int8_t>(buf, dst, n);
      else if (bits == 16)
        convert_row<std::int16_t>(buf, dst, n);
      else if (bits == 32)
        convert_row<std::int32_t>(buf, dst, n);
      else
        fail("geotiff: unsupported signed bit depth");
      break;
    case SAMPLEFORMAT_UINT:
    default:
      if (bits == 8)
        convert_row<std::uint8_t>(buf, dst, n);
      else if (bits == 16)
        convert_row<std::uint16_t>(buf, dst, n);
      else if (bits == 32)
        convert_row<std::uint32_t>(buf, dst, n);
      else
        fail("geotiff: unsupported unsigned bit depth");
      break;
  }
}

inline GeoMetadata read_geo_tags(TIFF* tif) {
  GeoMetadata geo;
  std::uint16_t count = 0;
  double* dval = nullptr;
  std::uint16_t* sval = nullptr;
  char* text = nullptr;
  if (TIFFGetField(tif, kTagPixelScale, &count, &dval))
    geo.pixel_scale.assign(dval, dval + count);
  if (TIFFGetField(tif, kTagTiepoints, &count, &dval))
    geo.tiepoints.assign(dval, dval + count);
  if (TIFFGetField(tif, kTagTransformation, &count, &dval))
    geo.transformation.assign(dval, dval + count);
  if (TIFFGetField(tif, kTagKeyDirectory, &count, &sval))
    geo.key_directory.assign(sval, sval + count);
  if (TIFFGetField(tif, kTagDoubleParams, &count, &dval))
    geo.double_params.assign(dval, dval + count);
  if (TIFFGetField(tif, kTagAsciiParams, &text) && text) geo.ascii_params = text;
  return geo;
}

inline void write_geo_tags(TIFF* tif, const GeoMetadata& geo) {
  if (!geo.pixel_scale.empty())
    TIFFSetField(tif, kTagPixelScale, static_cast<std::uint16_t>(geo.pixel_scale.size()),
                 geo.pixel_scale.data());
  if (!geo.tiepoints.empty())
    TIFFSetField(tif, kTagTiepoints, static_cast<std::uint16_t>(geo.tiepoints.size()),
                 geo.tiepoints.data());
  if (!geo.transformation.empty())
    TIFFSetField(tif, kTagTransformation,
                 static_cast<std::uint16_t>(geo.transformation.size()),
                 geo.transformation.data());
  if (!geo.key_directory.empty())
    TIFFSetField(tif, kTagKeyDirectory, static_cast<std::uint16_t>(geo.key_directory.size()),
                 geo.key_directory.data());
  if (!geo.double_params.empty())
    TIFFSetField(tif, kTagDoubleParams, static_cast<std::uint16_t>(geo.double_params.size()),
                 geo.double_params.data());
  if (!geo.ascii_params.empty())
    TIFFSetField(tif, kTagAsciiParams, geo.ascii_params.c_str());
}

}  // namespace detail

/// Reads a single-band raster (stripped or tiled layout; integer or float
/// samples) into doubles, keeping any georeferencing tags verbatim.
inline RasterData read_geotiff(const std::string& path) {
  detail::register_geotiff_tags();
  detail::TiffPtr tif(TIFFOpen(path.c_str(), "r"));
  if (!tif) fail("geotiff: cannot open " + path);

  std::uint32_t width = 0, height = 0;
  std::uint16_t samples = 1, bits = 8, format = SAMPLEFORMAT_UINT;
  TIFFGetField(tif.get(), TIFFTAG_IMAGEWIDTH, &width);
  TIFFGetField(tif.get(), TIFFTAG_IMAGELENGTH, &height);
  TIFFGetFieldDefaulted(tif.get(), TIFFTAG_SAMPLESPERPIXEL, &samples);
  TIFFGetFieldDefaulted(tif.get(), TIFFTAG_BITSPERSAMPLE, &bits);
  TIFFGetFieldDefaulted(tif.get(), TIFFTAG_SAMPLEFORMAT, &format);
  if (samples != 1) fail("geotiff: expected a single band, got " + std::to_string(samples));
  if (width == 0 || height == 0) fail("geotiff: empty raster " + path);

  RasterData out;
  out.cols = static_cast<int>(width);
  out.rows = static_cast<int>(height);
  out.values.resize(static_cast<std::size_t>(width) * height);
  out.geo = detail::read_geo_tags(tif.get());

  if (TIFFIsTiled(tif.get())) {
    std::uint32_t tw = 0, th = 0;
    TIFFGetField(tif.get(), TIFFTAG_TILEWIDTH, &tw);
    TIFFGetField(tif.get(), TIFFTAG_TILELENGTH, &th);
    std::vector<std::uint8_t> buf(TIFFTileSize(tif.get()));
    std::vector<double> conv(static_cast<std::size_t>(tw) * th);
    for (std::uint32_t y0 = 0; y0 < height; y0 += th)
      for (std::uint32_t x0 = 0; x0 < width; x0 += tw) {
        if (TIFFReadTile(tif.get(), buf.data(), x0, y0, 0, 0) < 0)
          fail("geotiff: tile read failed in " + path);
        detail::convert_samples(buf.data(), conv.data(), static_cast<int>(tw * th), format,
                                bits);
        for (std::uint32_t dy = 0; dy < th && y0 + dy < height; ++dy)
          for (std::uint32_t dx = 0; dx < tw && x0 + dx < width; ++dx)
            out.values[static_cast<std::size_t>(y0 + dy) * width + x0 + dx] =
                conv[static_cast<std::size_t>(dy) * tw + dx];
      }
  } else {
    std::vector<std::uint8_t> buf(TIFFScanlineSize(tif.get()));
    for (std::uint32_t y = 0; y < height; ++y) {
      if (TIFFReadScanline(tif.get(), buf.data(), y) < 0)
        fail("geotiff: scanline read failed in " + path);
      detail::convert_samples(buf.data(),
                              out.values.data() + static_cast<std::size_t>(y) * width,
                              static_cast<int>(width), format, bits);
    }
  }
  return out;
}

inline void write_geotiff(const std::string& path, const ImageF& img,
                          const GeoMetadata& geo = {}) {
  detail::register_geotiff_tags();
  detail::TiffPtr tif(TIFFOpen(path.c_str(), "w"));
  if (!tif) fail("geotiff: cannot create " + path);
  TIFFSetField(tif.get(), TIFFTAG_IMAGEWIDTH, static_cast<std::uint32_t>(img.cols()));
  TIFFSetField(tif.get(), TIFFTAG_IMAGELENGTH, static_cast<std::uint32_t>(img.rows()));
  TIFFSetField(tif.get(), TIFFTAG_SAMPLESPERPIXEL, 1);
  TIFFSetField(tif.get(), TIFFTAG_BITSPERSAMPLE, 32);
  TIFFSetField(tif.get(), TIFFTAG_SAMPLEFORMAT, SAMPLEFORMAT_IEEEFP);
  TIFFSetField(tif.get(), TIFFTAG_PHOTOMETRIC, PHOTOMETRIC_MINISBLACK);
  TIFFSetField(tif.get(), TIFFTAG_PLANARCONFIG, PLANARCONFIG_CONTIG);
  TIFFSetField(tif.get(), TIFFTAG_ROWSPERSTRIP, 1);
  detail::write_geo_tags(tif.get(), geo);
  for (int y = 0; y < img.rows(); ++y)
    if (TIFFWriteScanline(tif.get(), const_cast<float*>(&img(y, 0)), y) < 0)
      fail("geotiff: write failed for " + path);
}

inline void write_geotiff(const std::string& path, const MaskImage& mask,
                          const GeoMetadata& geo = {}) {
  detail::register_geotiff_tags();
  detail::TiffPtr tif(TIFFOpen(path.c_str(), "w"));
  if (!tif) fail("geotiff: cannot create " + path);
  TIFFSetField(tif.get(), TIFFTAG_IMAGEWIDTH, static_cast<std::uint32_t>(mask.cols()));
  TIFFSetField(tif.get(), TIFFTAG_IMAGELENGTH, static_cast<std::uint32_t>(mask.rows()));
  TIFFSetField(tif.get(), TIFFTAG_SAMPLESPERPIXEL, 1);
  TIFFSetField(tif.get(), TIFFTAG_BITSPERSAMPLE, 8);
  TIFFSetField(tif.get(), TIFFTAG_SAMPLEFORMAT, SAMPLEFORMAT_UINT);
  TIFFSetField(tif.get(), TIFFTAG_PHOTOMETRIC, PHOTOMETRIC_MINISBLACK);
  TIFFSetField(tif.get(), TIFFTAG_PLANARCONFIG, PLANARCONFIG_CONTIG);
  TIFFSetField(tif.get(), TIFFTAG_ROWSPERSTRIP, 1);
  detail::write_geo_tags(tif.get(), geo);
  for (int y = 0; y < mask.rows(); ++y)
    if (TIFFWriteScanline(tif.get(), const_cast<std::uint8_t*>(&mask(y, 0)), y) < 0)
      fail("geotiff: write failed for " + path);
}

}  // namespace wetseg
