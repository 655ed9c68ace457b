#include <stdio.h>

#include "toy_msg.h"

enum toy_state {
	TOY_STATE_IDLE,
	TOY_STATE_WAIT_ACK,
	TOY_STATE_ESTABLISHED,
};

struct toy_session {
	enum toy_state state;
	unsigned retries;
};

static const char *toy_state_name(enum toy_state s)
{
	switch (s) {
	case TOY_STATE_IDLE: return "IDLE";
	case TOY_STATE_WAIT_ACK: return "WAIT_ACK";
	case TOY_STATE_ESTABLISHED: return "ESTABLISHED";
	}
	return "?";
}

static void toy_set_state(struct toy_session *s, enum toy_state next)
{
	fprintf(stderr, "toy: %s -> %s\n", toy_state_name(s->state), toy_state_name(next));
	s->state = next;
}

/* IDLE: only a HELLO starts a session. */
static int toy_handle_idle(struct toy_session *s, const struct toy_msg *m)
{
	if (m->type != TOY_MSG_HELLO)
		return -1;
	s->retries = 0;
	toy_set_state(s, TOY_STATE_WAIT_ACK);
	return 0;
}

static int toy_handle_wait_ack(struct toy_session *s, const struct toy_msg *m)
{
	switch (m->type) {
	case TOY_MSG_ACK:
		toy_set_state(s, TOY_STATE_ESTABLISHED);
		return 0;
	case TOY_MSG_BYE:
		/* peer gave up before acking */
		toy_set_state(s, TOY_STATE_IDLE);
		return 0;
	case TOY_MSG_HELLO:
		/* duplicate hello, count it and keep waiting */
		if (++s->retries > 3)
			return -1;
		return 0;
	}
	return -1;
}

static int toy_handle_established(struct toy_session *s, const struct toy_msg *m)
{
	if (m->type == TOY_MSG_BYE) {
		toy_set_state(s, TOY_STATE_IDLE);
		return 0;
	}
	return -1;
}

int toy_session_input(struct toy_session *s, const struct toy_msg *m)
{
	switch (s->state) {
	case TOY_STATE_IDLE:
		return toy_handle_idle(s, m);
	case TOY_STATE_WAIT_ACK:
		return toy_handle_wait_ack(s, m);
	case TOY_STATE_ESTABLISHED:
		return toy_handle_established(s, m);
	}
	return -1;
}
