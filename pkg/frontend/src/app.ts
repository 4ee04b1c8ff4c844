/**
 * DOM wiring of the annotation tool.
 *
 * Click a message row to focus it, then click one of the highlighted
 * candidates (itself or the previous W messages) to record the link;
 * digit keys assign the backward distance directly.  Saving PUTs the whole
 * distance vector; the review toggle overlays model predictions and
 * per-message annotator agreement.
 */

import { ApiClient, ApiError } from './api.js'
import { buildReview, formatKappa } from './review.js'
import { AnnotationSession } from './session.js'
import type { AgreementResponse, ChatDetail, ChatSummary } from './types.js'

const SELF_GLYPH = '↺' // loop arrow for self-links

interface AppState {
  chats: ChatSummary[]
  window: number
  chat: ChatDetail | null
  session: AnnotationSession | null
  agreement: AgreementResponse | null
  focused: number | null
  review: boolean
}

const state: AppState = {
  chats: [],
  window: 5,
  chat: null,
  session: null,
  agreement: null,
  focused: null,
  review: false,
}

const api = new ApiClient()

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id)
  if (!node) throw new Error(`missing element #${id}`)
  return node as T
}

function annotatorId(): string {
  return (el<HTMLInputElement>('annotator').value || 'anonymous').trim()
}

function hint(text: string): void {
  const box = el<HTMLElement>('hint')
  box.textContent = text
  box.classList.add('visible')
  window.setTimeout(() => box.classList.remove('visible'), 1800)
}

// -- chat list ---------------------------------------------------------------

async function refreshChatList(): Promise<void> {
  const listing = await api.listChats()
  state.chats = listing.chats
  state.window = listing.window
  const container = el<HTMLElement>('chat-list')
  container.replaceChildren()
  for (const chat of state.chats) {
    const item = document.createElement('button')
    item.className = 'chat-item'
    item.dataset.chatId = chat.chat_id
    const progress = chat.annotators.length
      ? ` (${chat.annotators.length} annotator${chat.annotators.length > 1 ? 's' : ''})`
      : ''
    item.textContent = `${chat.chat_id} · ${chat.n_messages} msgs${progress}`
    item.addEventListener('click', () => {
      void openChat(chat.chat_id)
    })
    container.appendChild(item)
  }
}

async function openChat(chatId: string): Promise<void> {
  if (state.session?.dirty && !window.confirm('Discard unsaved annotations?')) {
    return
  }
  const chat = await api.getChat(chatId)
  state.chat = chat
  state.focused = null
  state.review = false
  state.agreement = null
  const existing = chat.annotations[annotatorId()]
  state.session = new AnnotationSession(
    chat.chat_id,
    annotatorId(),
    chat.messages.length,
    chat.window,
    existing,
  )
  el<HTMLElement>('chat-title').textContent = chat.chat_id
  renderMessages()
  renderControls()
}

// -- message rendering -------------------------------------------------------

function renderMessages(): void {
  const chat = state.chat
  const session = state.session
  const container = el<HTMLElement>('messages')
  container.replaceChildren()
  if (!chat || !session) return
  const candidateSet =
    state.focused === null ? new Set<number>() : new Set(session.candidates(state.focused))
  const review = state.review && state.agreement !== null
  const rows = review ? buildReview(chat, state.agreement as AgreementResponse) : null

  for (const message of chat.messages) {
    const row = document.createElement('div')
    row.classList.add('message', message.speaker === 'C' ? 'customer' : 'agent')
    if (message.index === state.focused) row.classList.add('focused')
    if (candidateSet.has(message.index)) row.classList.add('candidate')

    const label = document.createElement('span')
    label.className = 'link-label'
    const distance = session.distanceOf(message.index)
    if (distance === null) {
      label.textContent = '·'
      label.classList.add('unset')
    } else if (distance === 0) {
      label.textContent = SELF_GLYPH
    } else {
      label.textContent = `↑${distance}`
    }
    row.appendChild(label)

    const body = document.createElement('span')
    body.className = 'body'
    body.textContent = `#${message.index} [${message.speaker}] ${message.text}`
    row.appendChild(body)

    if (rows) {
      const info = rows[message.index]
      if (info) {
        const badge = document.createElement('span')
        badge.className = 'review-badge'
        if (info.agrees === null) {
          badge.textContent = info.prediction === null ? '' : `model ${info.prediction}`
        } else {
          badge.textContent = info.agrees
            ? `agree (${info.prediction})`
            : `model ${info.prediction} vs majority ${info.majority}`
          badge.classList.add(info.agrees ? 'agree' : 'disagree')
        }
        row.appendChild(badge)
      }
    }

    row.addEventListener('click', () => onRowClick(message.index))
    container.appendChild(row)
  }
}

function onRowClick(index: number): void {
  const session = state.session
  if (!session) return
  if (state.focused === null || state.focused === index) {
    state.focused = state.focused === index ? null : index
    renderMessages()
    return
  }
  if (!session.selectLink(state.focused, index)) {
    hint(
      `message ${state.focused} may only link to itself or the previous ` +
        `${session.maxDistance(state.focused)} messages`,
    )
    return
  }
  state.focused = null
  renderMessages()
  renderControls()
}

function onKey(event: KeyboardEvent): void {
  const session = state.session
  if (!session || state.focused === null) return
  if (!/^[0-9]$/.test(event.key)) return
  const distance = Number(event.key)
  if (!session.setDistance(state.focused, distance)) {
    hint(`distance ${distance} is outside the window of message ${state.focused}`)
    return
  }
  state.focused = null
  renderMessages()
  renderControls()
}

// -- controls ----------------------------------------------------------------

function renderControls(): void {
  const session = state.session
  const save = el<HTMLButtonElement>('save')
  save.disabled = !session || !session.complete
  el<HTMLElement>('status').textContent = session
    ? session.dirty
      ? 'unsaved changes'
      : 'saved'
    : ''
  el<HTMLElement>('kappa').textContent = state.agreement
    ? `κ ${formatKappa(state.agreement.kappa)}`
    : ''
}

async function save(): Promise<void> {
  const session = state.session
  if (!session || !session.complete) return
  try {
    const echo = await api.putAnnotation(
      session.chatId,
      session.annotatorId,
      session.toPutBody().distances,
    )
    session.markSaved()
    const matches =
      JSON.stringify(echo.distances) === JSON.stringify(session.toPutBody().distances)
    hint(matches ? 'saved' : 'server echo differs from the session')
    renderControls()
    await refreshChatList()
  } catch (error) {
    hint(error instanceof ApiError ? error.detail : String(error))
  }
}

async function toggleReview(): Promise<void> {
  if (!state.chat) return
  state.review = !state.review
  if (state.review && state.agreement === null) {
    try {
      state.agreement = await api.getAgreement(state.chat.chat_id)
    } catch (error) {
      state.review = false
      hint(error instanceof ApiError ? error.detail : String(error))
      return
    }
  }
  renderMessages()
  renderControls()
}

export function start(): void {
  el<HTMLButtonElement>('save').addEventListener('click', () => void save())
  el<HTMLButtonElement>('review-toggle').addEventListener(
    'click',
    () => void toggleReview(),
  )
  document.addEventListener('keydown', onKey)
  window.addEventListener('beforeunload', (event) => {
    if (state.session?.dirty) {
      event.preventDefault()
      event.returnValue = ''
    }
  })
  void refreshChatList()
}

start()
