#include "mailgraph/error.hpp"

namespace mailgraph {

bool Error::is_user_error() const noexcept
{
    return kind_ == ErrorKind::invalid_argument || kind_ == ErrorKind::not_found ||
           kind_ == ErrorKind::conflict;
}

int Error::http_status() const noexcept
{
    switch (kind_) {
    case ErrorKind::invalid_argument: return 400;
    case ErrorKind::not_found: return 404;
    case ErrorKind::conflict: return 409;
    case ErrorKind::transport: return 502;
    default: return 500;
    }
}

}  // namespace mailgraph
