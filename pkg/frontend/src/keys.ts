/** Map KeyboardEvent.key values to X11 keysyms (the protocol's key space). */

const NAMED_KEYS: Record<string, number> = {
  Backspace: 0xff08,
  Tab: 0xff09,
  Enter: 0xff0d,
  Escape: 0xff1b,
  Insert: 0xff63,
  Delete: 0xffff,
  Home: 0xff50,
  End: 0xff57,
  PageUp: 0xff55,
  PageDown: 0xff56,
  ArrowLeft: 0xff51,
  ArrowUp: 0xff52,
  ArrowRight: 0xff53,
  ArrowDown: 0xff54,
  Shift: 0xffe1,
  Control: 0xffe3,
  Alt: 0xffe9,
  Meta: 0xffe7,
  CapsLock: 0xffe5,
  F1: 0xffbe,
  F2: 0xffbf,
  F3: 0xffc0,
  F4: 0xffc1,
  F5: 0xffc2,
  F6: 0xffc3,
  F7: 0xffc4,
  F8: 0xffc5,
  F9: 0xffc6,
  F10: 0xffc7,
  F11: 0xffc8,
  F12: 0xffc9,
};

export function keysymForKey(key: string): number | null {
  if (key.length === 1) {
    const code = key.codePointAt(0)!;
    // latin-1 range maps straight through; everything else is out of scope
    return code <= 0xff ? code : null;
  }
  return NAMED_KEYS[key] ?? null;
}

/** The scene's step-advance key. */
export const NEXT_STEP_KEYSYM = "n".codePointAt(0)!;
