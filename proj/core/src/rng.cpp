#include "iterfilt/rng.hpp"

namespace iterfilt {

double RngStream::normal() { return normal_(*this); }

}  // namespace iterfilt
