/* Numeric ABI shared by the VM and the OS prelude. */
#ifndef GVM_ABI_H
#define GVM_ABI_H

/* hc.control actions */
#define GVM_CTL_GET 0
#define GVM_CTL_SET 1
#define GVM_CTL_OR 2
#define GVM_CTL_CLEAR 3

/* hc.control registers */
#define GVM_REG_FRAME 0
#define GVM_REG_GLOBALS 1
#define GVM_REG_CONSTANTS 2
#define GVM_REG_SCHED 3
#define GVM_REG_FAULT 4
#define GVM_REG_FLAGS 5
#define GVM_REG_PC 6

/* flags register bits */
#define GVM_FLAG_ERROR 1
#define GVM_FLAG_ACCEPT 2
#define GVM_FLAG_MASK 4
#define GVM_FLAG_INTERRUPTED 8

/* first argument of the fault handler */
#define GVM_FAULT_OUT_OF_BOUNDS 1
#define GVM_FAULT_USE_AFTER_FREE 2
#define GVM_FAULT_DOUBLE_FREE 3
#define GVM_FAULT_INVALID_FREE 4
#define GVM_FAULT_BAD_POINTER 5
#define GVM_FAULT_READ_ONLY 6
#define GVM_FAULT_UNDEFINED_CONTROL 7
#define GVM_FAULT_DIVISION_BY_ZERO 8
#define GVM_FAULT_BAD_JUMP_TARGET 9
#define GVM_FAULT_CALL_ARITY_MISMATCH 10
#define GVM_FAULT_HYPERCALL_MISUSE 11
#define GVM_FAULT_DOUBLE_FAULT 12

/* hc.interrupt_mem access kind: (kind << 8) | width */
#define GVM_MEM_LOAD 0
#define GVM_MEM_STORE 1

#endif
