#ifndef TOY_MSG_H
#define TOY_MSG_H

#include <stddef.h>
#include <stdint.h>

enum toy_msg_type {
  TOY_MSG_HELLO = 1,
  TOY_MSG_ACK = 2,
  TOY_MSG_BYE = 3,
};

struct toy_msg {
  uint8_t type;
  uint8_t len;
  uint8_t body[62];
};

int toy_msg_decode(const uint8_t *buf, size_t n, struct toy_msg *out);
size_t toy_msg_encode(const struct toy_msg *m, uint8_t *buf, size_t cap);

#endif
